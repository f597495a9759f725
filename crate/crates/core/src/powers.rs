//! Optimal source/relay power allocation for single-antenna relaying.
//!
//! The high-SNR bound is a two-term polynomial in 1/β₁ and 1/β₂; its unique
//! interior stationary point gives the optimal split. Roots are located by a
//! bracket scan plus bisection on the stationarity condition, then validated
//! against the bound itself.

use thiserror::Error;

use crate::bounds::{factorial_f, sine_power_integral};
use crate::model::{PowerSplit, SystemConfig};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PowersError {
    #[error("no stationary point found and bound minimization failed")]
    NoRootInInterval,
}

/// Which channel variance the second coefficient's final factor carries.
/// The two published forms disagree; they coincide whenever σ²_SD = σ²_RD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaVariant {
    /// σ²_SD repeated, as printed.
    #[default]
    Printed,
    /// σ²_RD, matching the bound's relay-phase factor.
    Symmetric,
}

/// Coefficients of the two bound terms with the power dependence factored
/// out: bound(β₁) = Δ₁ P^-(N_R+N_SN_D) β₁^-(N_R+N_SN_D)
///               + Δ₂ P^-(N_SN_D+1) β₁^-N_SN_D β₂⁻¹.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaCoefficients {
    pub delta1: f64,
    pub delta2: f64,
}

pub fn delta_coefficients(cfg: &SystemConfig, variant: DeltaVariant) -> DeltaCoefficients {
    let n = cfg.n_s * cfg.n_d;
    let b = (PI / cfg.m as f64).sin().powi(2);
    let limit = crate::analytic::psk_arc_limit(cfg.m);
    let i1 = sine_power_integral(2 * cfg.n_r as u32, limit);
    let i2 = sine_power_integral(2 * n as u32, limit);
    let i3 = sine_power_integral(2 * n as u32 + 2, limit);
    let delta1 = (n * cfg.n_r) as f64
        * factorial_f(cfg.n_r - 1)
        * factorial_f(n - 1)
        * i1
        * i2
        / (PI * PI)
        / (b * cfg.var_sr / cfg.n0).powi(cfg.n_r as i32)
        / (b * cfg.var_sd / cfg.n0).powi(n as i32);
    let last_var = match variant {
        DeltaVariant::Printed => cfg.var_sd,
        DeltaVariant::Symmetric => cfg.var_rd,
    };
    let delta2 = n as f64 * factorial_f(n - 1) * i3 / PI
        / (b * cfg.var_sd / cfg.n0).powi(n as i32)
        / (b * last_var / cfg.n0);
    DeltaCoefficients { delta1, delta2 }
}

/// Bound value reconstructed from the Δ coefficients at a candidate split.
fn bound_at(cfg: &SystemConfig, d: &DeltaCoefficients, beta1: f64) -> f64 {
    let n = (cfg.n_s * cfg.n_d) as i32;
    let a = cfg.n_r as i32 + n;
    let p = cfg.total_power;
    d.delta1 * p.powi(-a) * beta1.powi(-a)
        + d.delta2 * p.powi(-(n + 1)) * beta1.powi(-n) / (1.0 - beta1)
}

/// Stationarity condition of the bound at β₁ (the negated β₁-derivative).
/// A root of this in (0,1) is a candidate optimal split.
pub fn optimality_residual(cfg: &SystemConfig, variant: DeltaVariant, beta1: f64) -> f64 {
    let d = delta_coefficients(cfg, variant);
    residual_terms(cfg, &d, beta1).0
}

fn residual_terms(cfg: &SystemConfig, d: &DeltaCoefficients, beta1: f64) -> (f64, f64) {
    let n = (cfg.n_s * cfg.n_d) as i32;
    let a = cfg.n_r as i32 + n;
    let p = cfg.total_power;
    let beta2 = 1.0 - beta1;
    let t1 = a as f64 * d.delta1 * p.powi(-a) * beta1.powi(-(a + 1));
    let t2 = n as f64 * d.delta2 * p.powi(-(n + 1)) * beta1.powi(-(n + 1)) / beta2;
    let t3 = d.delta2 * p.powi(-(n + 1)) * beta1.powi(-n) / (beta2 * beta2);
    let scale = t1.abs().max(t2.abs()).max(t3.abs());
    (t1 + t2 - t3, scale)
}

/// Largest magnitude among the three stationarity terms; the residual test
/// normalizes against this.
pub fn optimality_scale(cfg: &SystemConfig, variant: DeltaVariant, beta1: f64) -> f64 {
    let d = delta_coefficients(cfg, variant);
    residual_terms(cfg, &d, beta1).1
}

/// Optimal (β₁, β₂) minimizing the high-SNR bound at the configured total
/// power.
///
/// Scans [0.01, 0.99] for sign changes of the stationarity condition,
/// bisects each bracket to 1e-12 and returns the root with the smallest
/// bound value. Falls back to direct golden-section minimization of the
/// bound when the scan finds no root.
pub fn optimal_split(cfg: &SystemConfig, variant: DeltaVariant) -> Result<PowerSplit, PowersError> {
    let d = delta_coefficients(cfg, variant);
    if !(d.delta1.is_finite() && d.delta2.is_finite() && d.delta1 > 0.0 && d.delta2 > 0.0) {
        return Err(PowersError::NoRootInInterval);
    }
    let g = |beta1: f64| residual_terms(cfg, &d, beta1).0;

    const STEPS: usize = 98;
    let lo = 0.01;
    let hi = 0.99;
    let mut roots = Vec::new();
    let mut prev_x = lo;
    let mut prev_g = g(lo);
    for i in 1..=STEPS {
        let x = lo + (hi - lo) * i as f64 / STEPS as f64;
        let gx = g(x);
        if prev_g == 0.0 {
            roots.push(prev_x);
        } else if prev_g * gx < 0.0 {
            roots.push(bisect(&g, prev_x, x));
        }
        prev_x = x;
        prev_g = gx;
    }
    if prev_g == 0.0 {
        roots.push(prev_x);
    }

    let best = roots
        .into_iter()
        .min_by(|&x, &y| {
            bound_at(cfg, &d, x)
                .partial_cmp(&bound_at(cfg, &d, y))
                .unwrap()
        })
        .unwrap_or_else(|| golden_min(|x| bound_at(cfg, &d, x), 1e-6, 1.0 - 1e-6));
    Ok(PowerSplit::from_beta1(best))
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-12 {
            return mid;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if glo * gm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            glo = gm;
        }
    }
    0.5 * (lo + hi)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::upper_bound_single;
    use crate::model::RelayMode;

    fn cfg(n_s: usize, n_r: usize, n_d: usize) -> SystemConfig {
        SystemConfig {
            n_s,
            n_r,
            n_d,
            m: 4,
            total_power: 100.0,
            split: PowerSplit::equal(),
            var_sd: 1.0,
            var_sr: 1.0,
            var_rd: 1.0,
            n0: 1.0,
            mode: RelayMode::SingleAntenna,
        }
    }

    #[test]
    fn delta1_scales_with_noise() {
        let c = cfg(1, 1, 1);
        let d1 = delta_coefficients(&c, DeltaVariant::Printed);
        let mut c2 = c.clone();
        c2.n0 = 2.0;
        let d2 = delta_coefficients(&c2, DeltaVariant::Printed);
        let a = (c.n_r + c.n_s * c.n_d) as i32;
        assert!((d2.delta1 / d1.delta1 - 2f64.powi(a)).abs() < 1e-12);
    }

    #[test]
    fn deltas_vanish_with_strong_direct_link() {
        let mut c = cfg(1, 1, 1);
        c.var_sd = 1e12;
        let d = delta_coefficients(&c, DeltaVariant::Printed);
        assert!(d.delta1 < 1e-10 && d.delta2 < 1e-10);
    }

    #[test]
    fn variants_coincide_at_equal_variances() {
        let c = cfg(2, 2, 2);
        let p = delta_coefficients(&c, DeltaVariant::Printed);
        let s = delta_coefficients(&c, DeltaVariant::Symmetric);
        assert_eq!(p, s);
    }

    #[test]
    fn variants_differ_when_relay_link_differs() {
        let mut c = cfg(2, 2, 2);
        c.var_rd = 4.0;
        let p = delta_coefficients(&c, DeltaVariant::Printed);
        let s = delta_coefficients(&c, DeltaVariant::Symmetric);
        assert!((p.delta2 / s.delta2 - 4.0).abs() < 1e-12);
        assert_eq!(p.delta1, s.delta1);
    }

    #[test]
    fn delta1_matches_bound_term_extraction() {
        // The first bound term at equal power is Δ₁ (β₁ P)^-(N_R+N_SN_D);
        // recover Δ₁ numerically from the bound terms and compare.
        let c = cfg(1, 1, 1);
        let d = delta_coefficients(&c, DeltaVariant::Printed);
        let (t1, _) = crate::bounds::upper_bound_single_terms(&c);
        let a = (c.n_r + c.n_s * c.n_d) as i32;
        let recovered = t1 * (c.split.beta1 * c.total_power / c.n0).powi(a) * c.n0.powi(0);
        // t1 = Δ₁ P^-a β₁^-a with N₀ = 1 here.
        assert!((recovered / d.delta1 - 1.0).abs() < 1e-12, "{recovered} vs {}", d.delta1);
    }

    #[test]
    fn split_is_a_minimizer_and_residual_vanishes() {
        for (ns, nr, nd) in [(1, 1, 1), (2, 2, 2), (2, 1, 2)] {
            let c = cfg(ns, nr, nd);
            let split = optimal_split(&c, DeltaVariant::Printed).unwrap();
            let b1 = split.beta1;
            let g = optimality_residual(&c, DeltaVariant::Printed, b1);
            let scale = optimality_scale(&c, DeltaVariant::Printed, b1);
            assert!(g.abs() / scale < 1e-9, "({ns},{nr},{nd}): residual {g}");

            let eval = |beta1: f64| {
                let mut cc = c.clone();
                cc.split = PowerSplit::from_beta1(beta1);
                upper_bound_single(&cc)
            };
            let here = eval(b1);
            assert!(eval(b1 - 0.01) >= here, "({ns},{nr},{nd}) left");
            assert!(eval(b1 + 0.01) >= here, "({ns},{nr},{nd}) right");
        }
    }

    #[test]
    fn split_agrees_with_grid_minimization() {
        for (ns, nr, nd) in [(1, 1, 1), (2, 2, 2)] {
            let c = cfg(ns, nr, nd);
            let split = optimal_split(&c, DeltaVariant::Printed).unwrap();
            let eval = |beta1: f64| {
                let mut cc = c.clone();
                cc.split = PowerSplit::from_beta1(beta1);
                upper_bound_single(&cc)
            };
            let grid_best = (1..1000)
                .map(|i| i as f64 / 1000.0)
                .min_by(|&x, &y| eval(x).partial_cmp(&eval(y)).unwrap())
                .unwrap();
            assert!(
                (grid_best - split.beta1).abs() <= 1.0 / 1000.0 + 1e-12,
                "({ns},{nr},{nd}): grid {grid_best} vs root {}",
                split.beta1
            );
        }
    }

    #[test]
    fn reference_allocation_single_branch() {
        // The (1,1,1) optimum is power-invariant; its value is pinned by the
        // acceptance suite. Sanity-check the invariance here.
        let c = cfg(1, 1, 1);
        let s100 = optimal_split(&c, DeltaVariant::Printed).unwrap();
        let mut c2 = c.clone();
        c2.total_power = 1e6;
        let s_hi = optimal_split(&c2, DeltaVariant::Printed).unwrap();
        assert!((s100.beta1 - s_hi.beta1).abs() < 1e-9);
        assert!((s100.beta1 - 0.6270).abs() < 0.005);
    }
}
