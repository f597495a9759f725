//! Monte Carlo link-level engine: channel generation, antenna selection,
//! selective decode-and-forward trial execution for both relay modes, and
//! SER estimation with confidence intervals.
//!
//! Reproducibility contract: every trial derives its own RNG stream from the
//! 64-bit master seed and the trial index (a counter-based stream cipher),
//! so error counts are bit-identical for any worker count and any scheduling
//! order. Gaussian variates come from the polar Box–Muller transform applied
//! to that stream.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::mat::CMat;
use crate::model::{ChannelSet, ModulationScheme, RelayMode, SystemConfig};
use crate::stbc::Codebook;

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("cannot estimate a rate from zero symbols")]
    ZeroTotal,
}

/// Antenna choices for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionResult {
    /// (destination antenna i, source antenna j) maximizing the direct gain.
    pub sd_pair: (usize, usize),
    /// Relay antenna maximizing the gain in the selected source column.
    pub sr_antenna: usize,
    /// Relay-phase (destination, relay) antennas, drawn uniformly at random;
    /// absent under STBC relaying where all antennas transmit.
    pub rd_pair: Option<(usize, usize)>,
}

/// Aggregated outcome of a batch of independent trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialBatchResult {
    pub trials: u64,
    /// PSK symbols carried per trial (1 for single-antenna relaying).
    pub symbols_per_trial: u32,
    pub symbol_errors: u64,
    /// Relay-side per-symbol decode errors across all trials.
    pub relay_decode_failures: u64,
    pub ser_estimate: f64,
    pub ci95_halfwidth: f64,
}

impl TrialBatchResult {
    pub fn total_symbols(&self) -> u64 {
        self.trials * self.symbols_per_trial as u64
    }
}

/// Expands the 64-bit master seed into a cipher key; trial streams then
/// differ only in the stream counter.
fn master_rng(seed: u64) -> ChaCha8Rng {
    let mut s = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        // splitmix64 step
        s = s.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn trial_rng(base: &ChaCha8Rng, trial: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(trial);
    rng
}

/// Circularly symmetric complex Gaussian with E|h|² = `variance`, generated
/// by the polar Box–Muller transform.
fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]: keeps ln finite
    let u2: f64 = rng.gen();
    let r = (-variance * u1.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * PI * u2)
}

/// One realization of the three channel matrices, entries i.i.d. complex
/// Gaussian with the per-link variances of `cfg`.
pub fn draw_channels<R: Rng>(cfg: &SystemConfig, rng: &mut R) -> ChannelSet {
    let mut draw = |rows: usize, cols: usize, var: f64, rng: &mut R| {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, complex_gaussian(rng, var));
            }
        }
        m
    };
    ChannelSet {
        h_sd: draw(cfg.n_d, cfg.n_s, cfg.var_sd, rng),
        h_sr: draw(cfg.n_r, cfg.n_s, cfg.var_sr, rng),
        h_rd: draw(cfg.n_d, cfg.n_r, cfg.var_rd, rng),
    }
}

/// Two-stage selection: the (destination, source) pair with the largest
/// direct gain, then the relay antenna with the largest gain in that source
/// column. Ties resolve to the lowest index, row-major. Single-antenna
/// relaying additionally draws the relay-phase antenna pair uniformly.
pub fn select_antennas<R: Rng>(
    ch: &ChannelSet,
    mode: RelayMode,
    rng: &mut R,
) -> SelectionResult {
    let (n_d, n_s) = (ch.h_sd.rows(), ch.h_sd.cols());
    let n_r = ch.h_sr.rows();
    let mut best = (0usize, 0usize);
    let mut best_g = f64::NEG_INFINITY;
    for i in 0..n_d {
        for j in 0..n_s {
            let g = ch.h_sd.get(i, j).norm_sqr();
            if g > best_g {
                best_g = g;
                best = (i, j);
            }
        }
    }
    let j = best.1;
    let mut sr = 0usize;
    let mut sr_g = f64::NEG_INFINITY;
    for k in 0..n_r {
        let g = ch.h_sr.get(k, j).norm_sqr();
        if g > sr_g {
            sr_g = g;
            sr = k;
        }
    }
    let rd_pair = match mode {
        RelayMode::SingleAntenna => {
            let n = rng.gen_range(0..n_d);
            let m = rng.gen_range(0..n_r);
            Some((n, m))
        }
        RelayMode::Stbc => None,
    };
    SelectionResult {
        sd_pair: best,
        sr_antenna: sr,
        rd_pair,
    }
}

/// Post-combining SNR at the destination's MRC detector,
/// (P_S g_SD + P_R g_RD)/N₀, for a single-antenna-relaying selection.
pub fn mrc_snr(ch: &ChannelSet, sel: &SelectionResult, cfg: &SystemConfig) -> f64 {
    let (i, j) = sel.sd_pair;
    let (n, m) = sel
        .rd_pair
        .expect("mrc_snr needs a single-antenna relay-phase selection");
    let g_sd = ch.h_sd.get(i, j).norm_sqr();
    let g_rd = ch.h_rd.get(n, m).norm_sqr();
    (cfg.source_power() * g_sd + cfg.relay_power() * g_rd) / cfg.n0
}

fn run_batch<F>(trials: u64, seed: u64, workers: usize, per_trial: F) -> (u64, u64)
where
    F: Fn(&mut ChaCha8Rng) -> (u32, u32) + Sync,
{
    let base = master_rng(seed);
    let body = || {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(&base, t);
                let (e, r) = per_trial(&mut rng);
                (e as u64, r as u64)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    };
    if workers == 0 {
        body()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool");
        pool.install(body)
    }
}

/// Selective decode-and-forward with a single relay-phase antenna pair.
///
/// Per trial: draw channels, select antennas, send one PSK symbol; the relay
/// forwards it only when its own decision was correct, and the destination
/// then MRC-combines both phases; otherwise the destination decides from the
/// direct observation alone. `workers = 0` uses all cores.
pub fn run_single_antenna(
    cfg: &SystemConfig,
    trials: u64,
    seed: u64,
    workers: usize,
) -> TrialBatchResult {
    let psk = ModulationScheme::psk(cfg.m).expect("validated modulation order");
    let ps = cfg.source_power();
    let pr = cfg.relay_power();
    let amp_s = ps.sqrt();
    let amp_r = pr.sqrt();

    let (symbol_errors, relay_failures) = run_batch(trials, seed, workers, |rng| {
        let ch = draw_channels(cfg, rng);
        let sel = select_antennas(&ch, RelayMode::SingleAntenna, rng);
        let s = rng.gen_range(0..cfg.m as usize);
        let w_sd = complex_gaussian(rng, cfg.n0);
        let w_sr = complex_gaussian(rng, cfg.n0);
        let w_rd = complex_gaussian(rng, cfg.n0);

        let x = psk.point(s);
        let h_sd = ch.h_sd.get(sel.sd_pair.0, sel.sd_pair.1);
        let h_sr = ch.h_sr.get(sel.sr_antenna, sel.sd_pair.1);
        let y_sd = amp_s * h_sd * x + w_sd;
        let y_sr = amp_s * h_sr * x + w_sr;

        let relay_hat = psk.nearest(h_sr.conj() * y_sr);
        let relay_ok = relay_hat == s;

        let stat = if relay_ok {
            let (n, m) = sel.rd_pair.unwrap();
            let h_rd = ch.h_rd.get(n, m);
            let y_rd = amp_r * h_rd * x + w_rd;
            (amp_s * h_sd).conj() * y_sd + (amp_r * h_rd).conj() * y_rd
        } else {
            h_sd.conj() * y_sd
        };
        let s_hat = psk.nearest(stat);
        (u32::from(s_hat != s), u32::from(!relay_ok))
    });

    let (ser_estimate, ci95_halfwidth) =
        estimate_ser(symbol_errors, trials.max(1)).unwrap_or((0.0, 0.0));
    TrialBatchResult {
        trials,
        symbols_per_trial: 1,
        symbol_errors,
        relay_decode_failures: relay_failures,
        ser_estimate,
        ci95_halfwidth,
    }
}

/// Selective decode-and-forward with STBC relaying.
///
/// Per trial the source broadcasts the codeword's symbols one per slot; the
/// relay forwards the STBC codeword only if it decoded every symbol
/// correctly, and the destination then minimizes the joint two-phase ML
/// metric over all candidate tuples; otherwise the destination decides
/// per-symbol from the direct observations. Symbol errors are counted per
/// symbol.
pub fn run_stbc(
    cfg: &SystemConfig,
    cb: &Codebook,
    trials: u64,
    seed: u64,
    workers: usize,
) -> TrialBatchResult {
    assert_eq!(cfg.n_r, cb.n_r(), "codebook antenna count must match config");
    assert_eq!(cfg.m, cb.modulation().m, "codebook modulation must match config");
    let psk = cb.modulation().clone();
    let q_len = cb.symbols_per_codeword();
    let t2 = cb.t2();
    let m = cfg.m as usize;
    let amp_s = cfg.source_power().sqrt();
    let amp_r = (cfg.relay_power() / cfg.n_r as f64).sqrt();

    let (symbol_errors, relay_failures) = run_batch(trials, seed, workers, |rng| {
        let ch = draw_channels(cfg, rng);
        let sel = select_antennas(&ch, RelayMode::Stbc, rng);
        let symbols: Vec<usize> = (0..q_len).map(|_| rng.gen_range(0..m)).collect();
        let mut w_sd = Vec::with_capacity(q_len);
        let mut w_sr = Vec::with_capacity(q_len);
        for _ in 0..q_len {
            w_sd.push(complex_gaussian(rng, cfg.n0));
            w_sr.push(complex_gaussian(rng, cfg.n0));
        }
        let mut w_rd = CMat::zeros(cfg.n_d, t2);
        for i in 0..cfg.n_d {
            for j in 0..t2 {
                w_rd.set(i, j, complex_gaussian(rng, cfg.n0));
            }
        }

        let h_sd = ch.h_sd.get(sel.sd_pair.0, sel.sd_pair.1);
        let h_sr = ch.h_sr.get(sel.sr_antenna, sel.sd_pair.1);
        let y_sd: Vec<Complex64> = (0..q_len)
            .map(|q| amp_s * h_sd * psk.point(symbols[q]) + w_sd[q])
            .collect();

        let mut relay_errs = 0u32;
        for q in 0..q_len {
            let y_sr = amp_s * h_sr * psk.point(symbols[q]) + w_sr[q];
            if psk.nearest(h_sr.conj() * y_sr) != symbols[q] {
                relay_errs += 1;
            }
        }

        let errors = if relay_errs == 0 {
            // Relay transmits; destination runs the joint ML metric.
            let x_sent = cb.codeword(cb.index_of(&symbols));
            let h_eff = ch.h_rd.scale(amp_r);
            let y_rd = {
                let mut y = h_eff.mul(x_sent);
                for i in 0..cfg.n_d {
                    for j in 0..t2 {
                        y.set(i, j, y.get(i, j) + w_rd.get(i, j));
                    }
                }
                y
            };
            // Per-slot direct metrics, reused across candidate tuples.
            let mut direct: Vec<f64> = Vec::with_capacity(q_len * m);
            for q in 0..q_len {
                for k in 0..m {
                    direct.push((y_sd[q] - amp_s * h_sd * psk.point(k)).norm_sqr());
                }
            }
            let mut best = 0usize;
            let mut best_metric = f64::INFINITY;
            for (idx, x) in cb.codewords().iter().enumerate() {
                let relay_metric = y_rd.sub(&h_eff.mul(x)).frob_sq();
                let tuple = cb.tuple(idx);
                let mut metric = relay_metric;
                for (q, &k) in tuple.iter().enumerate() {
                    metric += direct[q * m + k];
                }
                if metric < best_metric {
                    best_metric = metric;
                    best = idx;
                }
            }
            let decided = cb.tuple(best);
            decided
                .iter()
                .zip(&symbols)
                .filter(|(a, b)| a != b)
                .count() as u32
        } else {
            // Relay stays silent; direct decisions only.
            let mut errs = 0u32;
            for q in 0..q_len {
                if psk.nearest(h_sd.conj() * y_sd[q]) != symbols[q] {
                    errs += 1;
                }
            }
            errs
        };
        (errors, relay_errs)
    });

    let total = trials.max(1) * q_len as u64;
    let (ser_estimate, ci95_halfwidth) = estimate_ser(symbol_errors, total).unwrap_or((0.0, 0.0));
    TrialBatchResult {
        trials,
        symbols_per_trial: q_len as u32,
        symbol_errors,
        relay_decode_failures: relay_failures,
        ser_estimate,
        ci95_halfwidth,
    }
}

/// Point estimate and 95% confidence half-width for an error rate.
///
/// Normal approximation 1.96·√(p̂(1−p̂)/n) when at least 20 errors were seen;
/// below that the half-width is the distance from p̂ to the exact
/// Clopper–Pearson upper limit.
pub fn estimate_ser(errors: u64, total: u64) -> Result<(f64, f64), SimError> {
    if total == 0 {
        return Err(SimError::ZeroTotal);
    }
    let p = errors as f64 / total as f64;
    let ci = if errors < 20 {
        clopper_pearson_upper(errors, total, 0.025) - p
    } else {
        1.96 * (p * (1.0 - p) / total as f64).sqrt()
    };
    Ok((p, ci))
}

/// ln C(n, k) for small k, accumulated exactly enough in f64.
fn ln_binom(n: u64, k: u64) -> f64 {
    (1..=k)
        .map(|i| (((n - k + i) as f64) / i as f64).ln())
        .sum()
}

/// log of the binomial CDF P(X ≤ k) — summed directly, k is small here.
fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
    let lp = p.ln();
    let lq = (1.0 - p).ln_1p_adjusted();
    (0..=k)
        .map(|j| (ln_binom(n, j) + j as f64 * lp + (n - j) as f64 * lq).exp())
        .sum()
}

trait Ln1pAdjusted {
    fn ln_1p_adjusted(self) -> f64;
}
impl Ln1pAdjusted for f64 {
    /// ln(self) where self = 1-p was computed externally; uses ln_1p on the
    /// complement for accuracy near 1.
    fn ln_1p_adjusted(self) -> f64 {
        (-(1.0 - self)).ln_1p()
    }
}

/// Upper 1-sided Clopper–Pearson limit: the p with P(X ≤ errors; n, p) = α.
fn clopper_pearson_upper(errors: u64, total: u64, alpha: f64) -> f64 {
    if errors >= total {
        return 1.0;
    }
    let mut lo = errors as f64 / total as f64;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binom_cdf(errors, total, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}
