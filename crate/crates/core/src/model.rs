//! Domain types and configuration validation shared by every other module.
//!
//! Powers, channel variances and the noise level are stored in linear scale;
//! dB conversion belongs to the CLI boundary.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::mat::CMat;

/// How the relay retransmits during the relay phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayMode {
    /// One randomly chosen transmit antenna at the relay and one randomly
    /// chosen receive antenna at the destination.
    SingleAntenna,
    /// Orthogonal space-time block code across all relay antennas.
    Stbc,
}

/// Fractional split of the total power between source and relay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    /// Source fraction β₁ ∈ (0, 1).
    pub beta1: f64,
    /// Relay fraction β₂ ∈ (0, 1); β₁ + β₂ = 1.
    pub beta2: f64,
}

impl PowerSplit {
    pub fn new(beta1: f64, beta2: f64) -> Self {
        Self { beta1, beta2 }
    }

    /// Equal split between source and relay.
    pub fn equal() -> Self {
        Self::new(0.5, 0.5)
    }

    /// Source gets `beta1`, relay the remainder.
    pub fn from_beta1(beta1: f64) -> Self {
        Self::new(beta1, 1.0 - beta1)
    }

    pub fn is_valid(&self) -> bool {
        self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && (self.beta1 + self.beta2 - 1.0).abs() <= 1e-12
    }
}

/// Full parameterization of one link-level experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Source antennas.
    pub n_s: usize,
    /// Relay antennas.
    pub n_r: usize,
    /// Destination antennas.
    pub n_d: usize,
    /// Modulation order M (power of two, ≥ 2).
    pub m: u32,
    /// Total transmit power P shared by source and relay, linear scale.
    pub total_power: f64,
    /// Split of `total_power` between source and relay.
    pub split: PowerSplit,
    /// Source→destination channel variance σ²_SD.
    pub var_sd: f64,
    /// Source→relay channel variance σ²_SR.
    pub var_sr: f64,
    /// Relay→destination channel variance σ²_RD.
    pub var_rd: f64,
    /// Noise variance N₀.
    pub n0: f64,
    /// Relay transmission mode.
    pub mode: RelayMode,
}

/// A single violated configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("antenna counts must all be at least 1")]
    InvalidAntennaCount,
    #[error("modulation order must be a power of two and at least 2")]
    InvalidModulationOrder,
    #[error("power split fractions must lie in (0,1) and sum to 1")]
    InvalidPowerSplit,
    #[error("STBC relaying needs 2, 3 or 4 relay antennas")]
    UnsupportedStbcSize,
    #[error("total power must be positive and finite")]
    InvalidPower,
    #[error("channel variances must be positive and finite")]
    InvalidVariance,
    #[error("noise variance must be positive and finite")]
    InvalidNoise,
}

impl SystemConfig {
    /// Source transmit power P_S = β₁ P.
    pub fn source_power(&self) -> f64 {
        self.split.beta1 * self.total_power
    }

    /// Relay transmit power P_R = β₂ P.
    pub fn relay_power(&self) -> f64 {
        self.split.beta2 * self.total_power
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), Vec<ConfigError>> {
        let mut errs = Vec::new();
        if self.n_s < 1 || self.n_r < 1 || self.n_d < 1 {
            errs.push(ConfigError::InvalidAntennaCount);
        }
        if self.m < 2 || !self.m.is_power_of_two() {
            errs.push(ConfigError::InvalidModulationOrder);
        }
        if !self.split.is_valid() {
            errs.push(ConfigError::InvalidPowerSplit);
        }
        if self.mode == RelayMode::Stbc && !(2..=4).contains(&self.n_r) {
            errs.push(ConfigError::UnsupportedStbcSize);
        }
        if !(self.total_power > 0.0 && self.total_power.is_finite()) {
            errs.push(ConfigError::InvalidPower);
        }
        for v in [self.var_sd, self.var_sr, self.var_rd] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(ConfigError::InvalidVariance);
                break;
            }
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            errs.push(ConfigError::InvalidNoise);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// One realization of the three link channel matrices.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Source→destination, N_D × N_S.
    pub h_sd: CMat,
    /// Source→relay, N_R × N_S.
    pub h_sr: CMat,
    /// Relay→destination, N_D × N_R.
    pub h_rd: CMat,
}

impl ChannelSet {
    pub fn dims_match(&self, cfg: &SystemConfig) -> bool {
        self.h_sd.rows() == cfg.n_d
            && self.h_sd.cols() == cfg.n_s
            && self.h_sr.rows() == cfg.n_r
            && self.h_sr.cols() == cfg.n_s
            && self.h_rd.rows() == cfg.n_d
            && self.h_rd.cols() == cfg.n_r
    }
}

/// Unit-energy M-PSK constellation with zero phase offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationScheme {
    /// Modulation order M.
    pub m: u32,
    /// Point k sits at exp(i 2πk/M).
    pub constellation: Vec<Complex64>,
    /// sin²(π/M), the SNR scaling of the PSK error integral.
    pub b: f64,
}

impl ModulationScheme {
    pub fn psk(m: u32) -> Result<Self, ConfigError> {
        if m < 2 || !m.is_power_of_two() {
            return Err(ConfigError::InvalidModulationOrder);
        }
        let constellation = (0..m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
            .collect();
        Ok(Self {
            m,
            constellation,
            b: (PI / m as f64).sin().powi(2),
        })
    }

    /// Index of the constellation point nearest to `z`; ties resolve to the
    /// lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.constellation.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    pub fn point(&self, k: usize) -> Complex64 {
        self.constellation[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qpsk_cfg() -> SystemConfig {
        SystemConfig {
            n_s: 2,
            n_r: 2,
            n_d: 2,
            m: 4,
            total_power: 100.0,
            split: PowerSplit::equal(),
            var_sd: 1.0,
            var_sr: 1.0,
            var_rd: 1.0,
            n0: 1.0,
            mode: RelayMode::Stbc,
        }
    }

    #[test]
    fn valid_reference_config() {
        assert!(qpsk_cfg().validate().is_ok());
    }

    #[test]
    fn modulation_order_three_rejected() {
        let mut cfg = qpsk_cfg();
        cfg.m = 3;
        let errs = cfg.validate().unwrap_err();
        assert!(errs.contains(&ConfigError::InvalidModulationOrder));
    }

    #[test]
    fn stbc_with_five_relay_antennas_rejected() {
        let mut cfg = qpsk_cfg();
        cfg.n_r = 5;
        let errs = cfg.validate().unwrap_err();
        assert!(errs.contains(&ConfigError::UnsupportedStbcSize));
    }

    #[test]
    fn every_violation_reported() {
        let mut cfg = qpsk_cfg();
        cfg.m = 3;
        cfg.n_s = 0;
        cfg.split = PowerSplit::new(0.7, 0.7);
        cfg.n0 = 0.0;
        let errs = cfg.validate().unwrap_err();
        assert!(errs.contains(&ConfigError::InvalidModulationOrder));
        assert!(errs.contains(&ConfigError::InvalidAntennaCount));
        assert!(errs.contains(&ConfigError::InvalidPowerSplit));
        assert!(errs.contains(&ConfigError::InvalidNoise));
    }

    #[test]
    fn qpsk_b_is_half() {
        let psk = ModulationScheme::psk(4).unwrap();
        assert!((psk.b - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constellation_unit_energy_and_distinct() {
        for m in [2u32, 4, 8, 16] {
            let psk = ModulationScheme::psk(m).unwrap();
            let mean_energy: f64 =
                psk.constellation.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
            assert!((mean_energy - 1.0).abs() < 1e-12);
            for p in &psk.constellation {
                assert!((p.norm() - 1.0).abs() < 1e-12);
            }
            for i in 0..m as usize {
                for j in (i + 1)..m as usize {
                    assert!((psk.point(i) - psk.point(j)).norm() > 1e-9);
                }
            }
        }
    }

    #[test]
    fn nearest_breaks_ties_low() {
        let psk = ModulationScheme::psk(4).unwrap();
        // Origin is equidistant from every point.
        assert_eq!(psk.nearest(Complex64::new(0.0, 0.0)), 0);
        assert_eq!(psk.nearest(Complex64::new(0.9, -0.1)), 0);
        assert_eq!(psk.nearest(Complex64::new(-0.2, 1.1)), 1);
    }
}
