//! High-SNR SER upper bounds, the sine-power integrals they are built from,
//! and empirical diversity-order extraction.

use std::f64::consts::PI;

use thiserror::Error;

use crate::analytic::psk_arc_limit;
use crate::model::SystemConfig;
use crate::stbc::DistanceSpectrum;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("need at least 3 points with positive SER inside the fit window")]
    InsufficientPoints,
    #[error("fit window contains zero-SER points")]
    ZeroSer,
    #[error("codebook distance spectrum is degenerate (ξ = 0)")]
    DegenerateCodebook,
}

/// How the STBC bound folds the pairwise eigenvalue products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StbcBoundForm {
    /// All products pooled into a single ξ before exponentiation.
    #[default]
    PooledXi,
    /// Per-pair sum of inverse products; the dominating form.
    PerPairSum,
}

/// ∫₀^limit (sin θ)^exponent dθ via the standard reduction recurrence.
pub fn sine_power_integral(exponent: u32, limit: f64) -> f64 {
    let s = limit.sin();
    let c = limit.cos();
    let mut prev = limit; // exponent 0
    if exponent == 0 {
        return prev;
    }
    let mut cur = 1.0 - c; // exponent 1
    for n in 2..=exponent {
        let next = -s.powi(n as i32 - 1) * c / n as f64 + (n - 1) as f64 / n as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// n! in floating point; exact through 20!, log-accumulated above that to
/// avoid overflow.
pub fn factorial_f(n: usize) -> f64 {
    if n <= 20 {
        (1..=n as u64).product::<u64>() as f64
    } else {
        (2..=n).map(|i| (i as f64).ln()).sum::<f64>().exp()
    }
}

/// The two terms of the single-antenna-relaying bound: the relay-decode
/// branch with (N₀/P)^(N_R+N_SN_D) and the relay-phase branch with
/// (N₀/P)^(N_SN_D+1).
pub fn upper_bound_single_terms(cfg: &SystemConfig) -> (f64, f64) {
    let n = cfg.n_s * cfg.n_d;
    let b = (PI / cfg.m as f64).sin().powi(2);
    let limit = psk_arc_limit(cfg.m);
    let i1 = sine_power_integral(2 * cfg.n_r as u32, limit);
    let i2 = sine_power_integral(2 * n as u32, limit);
    let i3 = sine_power_integral(2 * n as u32 + 2, limit);
    let beta1 = cfg.split.beta1;
    let beta2 = cfg.split.beta2;
    let inv_snr = cfg.n0 / cfg.total_power;

    let t1 = (n * cfg.n_r) as f64 / (PI * PI)
        * factorial_f(cfg.n_r - 1)
        * factorial_f(n - 1)
        * i1
        * i2
        / (b * beta1 * cfg.var_sr).powi(cfg.n_r as i32)
        / (b * beta1 * cfg.var_sd).powi(n as i32)
        * inv_snr.powi((cfg.n_r + n) as i32);
    let t2 = n as f64 / PI * factorial_f(n - 1) * i3
        / (b * beta1 * cfg.var_sd).powi(n as i32)
        / (b * beta2 * cfg.var_rd)
        * inv_snr.powi(n as i32 + 1);
    (t1, t2)
}

/// High-SNR upper bound on the end-to-end SER with single-antenna relaying.
pub fn upper_bound_single(cfg: &SystemConfig) -> f64 {
    let (t1, t2) = upper_bound_single_terms(cfg);
    t1 + t2
}

/// The two terms of the STBC-relaying bound, exponents (N₀/P)^(N_R+N_SN_D)
/// and (N₀/P)^(N_RN_D+N_SN_D).
pub fn upper_bound_stbc_terms(
    spectrum: &DistanceSpectrum,
    cfg: &SystemConfig,
    form: StbcBoundForm,
) -> Result<(f64, f64), BoundsError> {
    let n = cfg.n_s * cfg.n_d;
    let rd = cfg.n_r * cfg.n_d;
    let b = (PI / cfg.m as f64).sin().powi(2);
    let limit = psk_arc_limit(cfg.m);
    let i1 = sine_power_integral(2 * cfg.n_r as u32, limit);
    let i2 = sine_power_integral(2 * n as u32, limit);
    let i4 = sine_power_integral(2 * rd as u32, PI / 2.0);
    let beta1 = cfg.split.beta1;
    let beta2 = cfg.split.beta2;
    let inv_snr = cfg.n0 / cfg.total_power;

    let t1 = (n * cfg.n_r) as f64 / (PI * PI)
        * factorial_f(cfg.n_r - 1)
        * factorial_f(n - 1)
        * i1
        * i2
        / (b * beta1 * cfg.var_sr).powi(cfg.n_r as i32)
        / (b * beta1 * cfg.var_sd).powi(n as i32)
        * inv_snr.powi((cfg.n_r + n) as i32);

    let relay_factor = match form {
        StbcBoundForm::PooledXi => {
            let xi = spectrum.xi();
            if !(xi > 0.0 && xi.is_finite()) {
                return Err(BoundsError::DegenerateCodebook);
            }
            (beta2 * xi * cfg.var_rd / (4.0 * cfg.n_r as f64)).powi(-(rd as i32))
        }
        StbcBoundForm::PerPairSum => {
            let scale = (beta2 * cfg.var_rd / (4.0 * cfg.n_r as f64)).powi(-(rd as i32));
            let mut sum = 0.0;
            for g in spectrum.groups() {
                let product: f64 = g.eigenvalues.iter().product();
                if product <= 0.0 {
                    return Err(BoundsError::DegenerateCodebook);
                }
                sum += g.pairs_per_reference * product.powi(-(cfg.n_d as i32));
            }
            scale * sum
        }
    };
    let t2 = n as f64 / PI * factorial_f(n - 1) * i2 * i4
        / (b * beta1 * cfg.var_sd).powi(n as i32)
        * relay_factor
        * inv_snr.powi((n + rd) as i32);
    Ok((t1, t2))
}

/// High-SNR upper bound on the end-to-end SER with STBC relaying.
pub fn upper_bound_stbc(
    spectrum: &DistanceSpectrum,
    cfg: &SystemConfig,
    form: StbcBoundForm,
) -> Result<f64, BoundsError> {
    let (t1, t2) = upper_bound_stbc_terms(spectrum, cfg, form)?;
    Ok(t1 + t2)
}

/// Least-squares diversity-order fit of log₁₀ SER against log₁₀(P/N₀).
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityFit {
    /// Decades of SER lost per decade of SNR, reported positive.
    pub slope: f64,
    pub intercept: f64,
    /// SNR range actually used, dB.
    pub fit_range_db: (f64, f64),
    /// RMS residual of the fit in log₁₀ units.
    pub residual: f64,
}

/// Fits the diversity order on the curve points whose SNR lies inside
/// `window_db`. Points are `(snr_db, ser)` pairs.
pub fn fit_diversity(
    points: &[(f64, f64)],
    window_db: (f64, f64),
) -> Result<DiversityFit, BoundsError> {
    let in_window: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(snr, _)| *snr >= window_db.0 && *snr <= window_db.1)
        .collect();
    if in_window.len() < 3 {
        return Err(BoundsError::InsufficientPoints);
    }
    if in_window.iter().any(|(_, ser)| *ser <= 0.0) {
        return Err(BoundsError::ZeroSer);
    }
    let xs: Vec<f64> = in_window.iter().map(|(snr, _)| snr / 10.0).collect();
    let ys: Vec<f64> = in_window.iter().map(|(_, ser)| ser.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope_raw = sxy / sxx;
    let intercept = my - slope_raw * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope_raw * x + intercept)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let lo = in_window.iter().map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
    let hi = in_window.iter().map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
    Ok(DiversityFit {
        slope: -slope_raw,
        intercept,
        fit_range_db: (lo, hi),
        residual,
    })
}
