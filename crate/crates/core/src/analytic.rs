//! Closed-form SER expressions for both relay modes.
//!
//! Everything here reduces to angular integrals of the Craig type: the PSK
//! symbol-error integral runs over [0, (M-1)π/M], the Gaussian Q-function
//! over [0, π/2]. Fading averages turn those into integrals of rational
//! functions of sin²θ, which an adaptive Simpson rule evaluates to near
//! machine precision. The antenna-selection averages come out as alternating
//! binomial series; coefficients are computed exactly and the series is
//! summed in increasing order, refusing branch counts large enough to lose
//! the result to cancellation.

use std::f64::consts::PI;

use thiserror::Error;

use crate::model::{RelayMode, SystemConfig};
use crate::stbc::DistanceSpectrum;

/// Largest selection-branch count the alternating series is evaluated for.
/// Beyond this the cancellation between terms exceeds what f64 can carry.
pub const MAX_SERIES_BRANCHES: usize = 20;

const QUAD_REL_TOL: f64 = 1e-12;
const QUAD_MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("SNR must be nonnegative")]
    NegativeSnr,
    #[error("Q-function argument must be nonnegative")]
    NegativeArgument,
    #[error("adaptive quadrature did not converge within depth {depth}")]
    NonConvergence { depth: u32 },
    #[error("selection series with {branches} branches would cancel catastrophically (max {MAX_SERIES_BRANCHES})")]
    CatastrophicCancellation { branches: usize },
}

/// Which angular range the relay-phase factor of the joint STBC expression
/// integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelayPhaseLimit {
    /// The PSK arc (M-1)π/M, matching the broadcast-phase factor.
    #[default]
    PskArc,
    /// π/2, the range the pairwise-error average itself uses.
    HalfPi,
}

/// Upper limit (M-1)π/M of the PSK error integral.
pub fn psk_arc_limit(m: u32) -> f64 {
    (m as f64 - 1.0) * PI / m as f64
}

/// A positive integrand x(θ) together with its integration limit; the
/// `quadrature` operation integrates 1/x(θ) over [0, limit].
pub struct AngularIntegrand<F: Fn(f64) -> f64> {
    x: F,
    upper_limit: f64,
}

impl<F: Fn(f64) -> f64> AngularIntegrand<F> {
    pub fn new(x: F, upper_limit: f64) -> Self {
        Self { x, upper_limit }
    }

    /// Integrand over the PSK arc [0, (M-1)π/M].
    pub fn psk_arc(m: u32, x: F) -> Self {
        Self::new(x, psk_arc_limit(m))
    }

    /// Integrand over [0, π/2].
    pub fn half_pi(x: F) -> Self {
        Self::new(x, PI / 2.0)
    }
}

/// ∫₀^limit 1/x(θ) dθ with absolute error well below 1e-10.
pub fn quadrature<F: Fn(f64) -> f64>(f: &AngularIntegrand<F>) -> Result<f64, AnalyticError> {
    integrate(f.upper_limit, |theta| 1.0 / (f.x)(theta))
}

/// Adaptive Simpson integration of `f` over [0, limit].
///
/// The tolerance is both absolute and relative to a coarse magnitude
/// estimate, so tiny integrals (high-SNR tails) keep their relative accuracy
/// for use inside alternating series.
fn integrate(limit: f64, f: impl Fn(f64) -> f64) -> Result<f64, AnalyticError> {
    if limit == 0.0 {
        return Ok(0.0);
    }
    // Coarse magnitude scan sets the tolerance scale.
    let n = 32;
    let mut rough = 0.0;
    for i in 0..=n {
        let theta = limit * i as f64 / n as f64;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        rough += w * f(theta).abs();
    }
    rough *= limit / n as f64;
    // Relative tolerance keeps tiny high-SNR integrals accurate enough to
    // survive the alternating selection series; the floor handles an
    // identically-zero integrand.
    let tol = (rough * QUAD_REL_TOL).max(1e-300);

    let fa = f(0.0);
    let fm = f(limit / 2.0);
    let fb = f(limit);
    let whole = simpson(fa, fm, fb, limit);
    adaptive(&f, 0.0, limit, fa, fm, fb, whole, tol, 0)
}

#[inline]
fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, AnalyticError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    // Second acceptance clause: refinement has hit machine precision.
    if delta.abs() <= 15.0 * tol
        || delta.abs() <= 8.0 * f64::EPSILON * (left.abs() + right.abs())
    {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= QUAD_MAX_DEPTH {
        // A handful of unresolved panels this deep stay far inside the
        // 1e-10 error contract; anything larger is a real failure.
        if delta.abs() <= 1e-11 {
            return Ok(left + right + delta / 15.0);
        }
        return Err(AnalyticError::NonConvergence { depth });
    }
    let l = adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1)?;
    let r = adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)?;
    Ok(l + r)
}

/// Exact PSK symbol-error probability at instantaneous SNR `snr`:
/// (1/π) ∫₀^{(M-1)π/M} exp(-b·snr/sin²θ) dθ with b = sin²(π/M).
pub fn psk_ser(snr: f64, m: u32) -> Result<f64, AnalyticError> {
    if snr < 0.0 {
        return Err(AnalyticError::NegativeSnr);
    }
    let b = (PI / m as f64).sin().powi(2);
    let coef = b * snr;
    let v = integrate(psk_arc_limit(m), |theta| {
        let s2 = theta.sin().powi(2);
        if s2 == 0.0 {
            if coef > 0.0 {
                0.0
            } else {
                1.0
            }
        } else {
            (-coef / s2).exp()
        }
    })?;
    Ok(v / PI)
}

/// Gaussian Q-function via its angular representation,
/// (1/π) ∫₀^{π/2} exp(-x²/(2 sin²θ)) dθ, valid for x ≥ 0.
pub fn gaussian_q(x: f64) -> Result<f64, AnalyticError> {
    if x < 0.0 {
        return Err(AnalyticError::NegativeArgument);
    }
    let half_x2 = 0.5 * x * x;
    let v = integrate(PI / 2.0, |theta| {
        let s2 = theta.sin().powi(2);
        if s2 == 0.0 {
            if half_x2 > 0.0 {
                0.0
            } else {
                1.0
            }
        } else {
            (-half_x2 / s2).exp()
        }
    })?;
    Ok(v / PI)
}

/// Exact binomial coefficient in f64 (arguments stay small here).
fn binom(n: usize, k: usize) -> f64 {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..k.min(n - k) {
        num *= (n - i) as u128;
        den *= (i + 1) as u128;
    }
    (num / den) as f64 + ((num % den) as f64 / den as f64)
}

/// 1/(coef/sin²θ + shift), continuous at θ = 0.
#[inline]
fn inv_shifted(coef: f64, shift: f64, s2: f64) -> f64 {
    if s2 == 0.0 {
        if coef > 0.0 {
            0.0
        } else {
            1.0 / shift
        }
    } else {
        1.0 / (coef / s2 + shift)
    }
}

/// Average of the PSK error integral against the best-of-`branches`
/// exponential gain density: (N/π) Σₙ C(N-1,n)(-1)ⁿ ∫ dθ/(coef/sin²θ+n+1).
///
/// `extra` multiplies the integrand with one more shifted factor (the
/// relay-phase MRC branch); pass `None` for the plain selection average.
fn selection_series(
    branches: usize,
    coef: f64,
    m: u32,
    extra: Option<f64>,
) -> Result<f64, AnalyticError> {
    if branches > MAX_SERIES_BRANCHES {
        return Err(AnalyticError::CatastrophicCancellation { branches });
    }
    let limit = psk_arc_limit(m);
    let mut sum = 0.0;
    for n in 0..branches {
        let shift = (n + 1) as f64;
        let term = integrate(limit, |theta| {
            let s2 = theta.sin().powi(2);
            let base = inv_shifted(coef, shift, s2);
            match extra {
                Some(rc) => base * inv_shifted(rc, 1.0, s2),
                None => base,
            }
        })?;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom(branches - 1, n) * term;
    }
    Ok((branches as f64 * sum / PI).max(0.0))
}

/// SER of the selected source→destination link (selection over N_S·N_D gains).
pub fn ser_direct(cfg: &SystemConfig) -> Result<f64, AnalyticError> {
    let coef = cfg.source_power() * psk_b(cfg.m) * cfg.var_sd / cfg.n0;
    selection_series(cfg.n_s * cfg.n_d, coef, cfg.m, None)
}

/// SER of the source→relay link (selection over the N_R gains of the chosen
/// source antenna's column).
pub fn ser_source_relay(cfg: &SystemConfig) -> Result<f64, AnalyticError> {
    let coef = cfg.source_power() * psk_b(cfg.m) * cfg.var_sr / cfg.n0;
    selection_series(cfg.n_r, coef, cfg.m, None)
}

/// Destination SER when the relay forwarded and the destination MRC-combines
/// the selected direct branch with the random relay→destination branch.
pub fn ser_relayed_mrc(cfg: &SystemConfig) -> Result<f64, AnalyticError> {
    let b = psk_b(cfg.m);
    let coef_d = cfg.source_power() * b * cfg.var_sd / cfg.n0;
    let coef_r = cfg.relay_power() * b * cfg.var_rd / cfg.n0;
    selection_series(cfg.n_s * cfg.n_d, coef_d, cfg.m, Some(coef_r))
}

/// End-to-end SER for single-antenna relaying: the relay forwards only when
/// it decoded correctly, otherwise the destination decides from the direct
/// observation alone.
pub fn ser_end_to_end_single(cfg: &SystemConfig) -> Result<f64, AnalyticError> {
    let psd = ser_direct(cfg)?;
    let psr = ser_source_relay(cfg)?;
    let pj = ser_relayed_mrc(cfg)?;
    Ok(psd * psr + pj * (1.0 - psr))
}

fn psk_b(m: u32) -> f64 {
    (PI / m as f64).sin().powi(2)
}

/// Relay-phase pairwise factor ∏ₖ 1/(1 + cₖ/sin²θ)^{N_D}, continuous at 0.
#[inline]
fn pep_integrand(coefs: &[f64], n_d: i32, s2: f64) -> f64 {
    let mut v = 1.0;
    for &c in coefs {
        v *= inv_shifted(c, 1.0, s2).powi(n_d);
    }
    v
}

fn pep_coefs(eigenvalues: &[f64], cfg: &SystemConfig) -> Vec<f64> {
    let scale = cfg.relay_power() * cfg.var_rd / (4.0 * cfg.n0 * cfg.n_r as f64);
    eigenvalues.iter().map(|&l| scale * l).collect()
}

/// Average pairwise error probability of mistaking codeword `reference` for
/// codeword `other` on the relay→destination STBC link.
pub fn pep_average(
    spectrum: &DistanceSpectrum,
    reference: usize,
    other: usize,
    cfg: &SystemConfig,
) -> Result<f64, AnalyticError> {
    let eigs = spectrum.pair_eigenvalues(reference, other);
    let coefs = pep_coefs(eigs, cfg);
    let n_d = cfg.n_d as i32;
    let v = integrate(PI / 2.0, |theta| {
        pep_integrand(&coefs, n_d, theta.sin().powi(2))
    })?;
    Ok(v / PI)
}

/// Union bound on the relay→destination codeword error rate: the sum of
/// average PEPs over every competing codeword, averaged over the reference
/// codeword. May exceed 1 at low SNR.
pub fn ser_relay_dest_union(
    spectrum: &DistanceSpectrum,
    cfg: &SystemConfig,
) -> Result<f64, AnalyticError> {
    relay_union_factor(spectrum, cfg, PI / 2.0)
}

fn relay_union_factor(
    spectrum: &DistanceSpectrum,
    cfg: &SystemConfig,
    limit: f64,
) -> Result<f64, AnalyticError> {
    let n_d = cfg.n_d as i32;
    let mut sum = 0.0;
    for group in spectrum.groups() {
        let coefs = pep_coefs(&group.eigenvalues, cfg);
        let v = integrate(limit, |theta| {
            pep_integrand(&coefs, n_d, theta.sin().powi(2))
        })?;
        sum += group.pairs_per_reference * v / PI;
    }
    Ok(sum)
}

/// Destination SER when the relay forwarded an STBC codeword, in the
/// separable product form: the direct-link selection series times the
/// relay-phase union sum, each factor under its own angular integral.
///
/// `limit` selects the angular range of the relay-phase factor; see
/// [`RelayPhaseLimit`].
pub fn ser_relayed_stbc(
    spectrum: &DistanceSpectrum,
    cfg: &SystemConfig,
    limit: RelayPhaseLimit,
) -> Result<f64, AnalyticError> {
    let direct = ser_direct(cfg)?;
    let lim = match limit {
        RelayPhaseLimit::PskArc => psk_arc_limit(cfg.m),
        RelayPhaseLimit::HalfPi => PI / 2.0,
    };
    let relay = relay_union_factor(spectrum, cfg, lim)?;
    Ok(direct * relay)
}

/// End-to-end SER for STBC relaying, composing the same selective
/// decode-and-forward branches as the single-antenna case.
pub fn ser_end_to_end_stbc(
    spectrum: &DistanceSpectrum,
    cfg: &SystemConfig,
    limit: RelayPhaseLimit,
) -> Result<f64, AnalyticError> {
    debug_assert_eq!(cfg.mode, RelayMode::Stbc);
    let psd = ser_direct(cfg)?;
    let psr = ser_source_relay(cfg)?;
    let pj = ser_relayed_stbc(spectrum, cfg, limit)?;
    Ok(psd * psr + pj * (1.0 - psr))
}
