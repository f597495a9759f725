//! Orthogonal space-time block codebooks for the relay phase, their pairwise
//! distance spectra, and maximum-likelihood decoding.
//!
//! Supported designs: the rate-1 two-antenna code (2 symbols over 2 slots)
//! and the rate-1/2 three- and four-antenna designs (4 symbols over 8 slots,
//! conjugated second half). All codebooks are normalized to unit average
//! energy per antenna-slot.

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::mat::{hermitian_eigenvalues, CMat};
use crate::model::{ConfigError, ModulationScheme};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StbcError {
    #[error("no orthogonal design for {0} transmit antennas (supported: 2, 3, 4)")]
    UnsupportedStbcSize(usize),
    #[error("matrix dimensions do not match the codebook")]
    DimensionMismatch,
    #[error(transparent)]
    Modulation(#[from] ConfigError),
}

/// The full codeword set for one (antenna count, modulation order) pair.
#[derive(Debug, Clone)]
pub struct Codebook {
    n_r: usize,
    t2: usize,
    symbols_per_codeword: usize,
    modulation: ModulationScheme,
    codewords: Vec<CMat>,
}

impl Codebook {
    /// Builds the codeword set: one codeword per symbol tuple, M^Q in total.
    pub fn new(n_r: usize, m: u32) -> Result<Self, StbcError> {
        let modulation = ModulationScheme::psk(m)?;
        let (t2, symbols_per_codeword) = match n_r {
            2 => (2, 2),
            3 | 4 => (8, 4),
            other => return Err(StbcError::UnsupportedStbcSize(other)),
        };
        let count = (m as usize).pow(symbols_per_codeword as u32);
        let mut codewords = Vec::with_capacity(count);
        for index in 0..count {
            let tuple = tuple_of_index(index, m as usize, symbols_per_codeword);
            let symbols: Vec<Complex64> = tuple.iter().map(|&k| modulation.point(k)).collect();
            codewords.push(match n_r {
                2 => alamouti(&symbols),
                3 => stacked_design(&symbols, 3),
                4 => stacked_design(&symbols, 4),
                _ => unreachable!(),
            });
        }
        let mut cb = Self {
            n_r,
            t2,
            symbols_per_codeword,
            modulation,
            codewords,
        };
        cb.normalize();
        Ok(cb)
    }

    /// Rescales so the mean of ‖X‖²_F/(N_R·T₂) over the set is exactly 1.
    fn normalize(&mut self) {
        let mean: f64 = self
            .codewords
            .iter()
            .map(|x| x.frob_sq() / (self.n_r * self.t2) as f64)
            .sum::<f64>()
            / self.codewords.len() as f64;
        if (mean - 1.0).abs() > 1e-14 {
            let s = 1.0 / mean.sqrt();
            for x in &mut self.codewords {
                *x = x.scale(s);
            }
        }
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    /// Codeword duration in slots.
    pub fn t2(&self) -> usize {
        self.t2
    }

    pub fn symbols_per_codeword(&self) -> usize {
        self.symbols_per_codeword
    }

    /// Symbols carried per relay-phase slot.
    pub fn rate_internal(&self) -> f64 {
        self.symbols_per_codeword as f64 / self.t2 as f64
    }

    pub fn modulation(&self) -> &ModulationScheme {
        &self.modulation
    }

    pub fn codewords(&self) -> &[CMat] {
        &self.codewords
    }

    pub fn codeword(&self, index: usize) -> &CMat {
        &self.codewords[index]
    }

    /// Symbol tuple encoded by codeword `index`.
    pub fn tuple(&self, index: usize) -> Vec<usize> {
        tuple_of_index(index, self.modulation.m as usize, self.symbols_per_codeword)
    }

    /// Codeword index encoding `tuple`.
    pub fn index_of(&self, tuple: &[usize]) -> usize {
        let m = self.modulation.m as usize;
        tuple.iter().rev().fold(0, |acc, &k| acc * m + k)
    }
}

fn tuple_of_index(index: usize, m: usize, len: usize) -> Vec<usize> {
    let mut t = Vec::with_capacity(len);
    let mut rest = index;
    for _ in 0..len {
        t.push(rest % m);
        rest /= m;
    }
    t
}

/// Two-antenna orthogonal design: columns are time slots.
fn alamouti(x: &[Complex64]) -> CMat {
    let mut c = CMat::zeros(2, 2);
    c.set(0, 0, x[0]);
    c.set(0, 1, -x[1].conj());
    c.set(1, 0, x[1]);
    c.set(1, 1, x[0].conj());
    c
}

/// Rate-1/2 stacked orthogonal design for 3 or 4 antennas: a 4×4 real-type
/// block followed by its conjugate.
fn stacked_design(x: &[Complex64], rows: usize) -> CMat {
    let block = [
        [x[0], -x[1], -x[2], -x[3]],
        [x[1], x[0], x[3], -x[2]],
        [x[2], -x[3], x[0], x[1]],
        [x[3], x[2], -x[1], x[0]],
    ];
    CMat::from_fn(rows, 8, |i, j| {
        if j < 4 {
            block[i][j]
        } else {
            block[i][j - 4].conj()
        }
    })
}

/// Eigenvalue data of one codeword pair difference.
#[derive(Debug, Clone)]
pub struct PairSpectrum {
    /// Lower codeword index of the unordered pair.
    pub a: usize,
    /// Higher codeword index.
    pub b: usize,
    /// Eigenvalues of (X_a − X_b)(X_a − X_b)^H, descending, length N_R.
    pub eigenvalues: Vec<f64>,
    /// Product of all N_R eigenvalues.
    pub lambda_product: f64,
}

/// Distinct eigenvalue multisets with their multiplicity per reference
/// codeword; PEP sums iterate these instead of every pair.
#[derive(Debug, Clone)]
pub struct SpectrumGroup {
    pub eigenvalues: Vec<f64>,
    /// Ordered pairs carrying this multiset, divided by the codebook size.
    pub pairs_per_reference: f64,
}

/// Pairwise distance spectrum of a codebook.
#[derive(Debug, Clone)]
pub struct DistanceSpectrum {
    n_r: usize,
    size: usize,
    pairs: Vec<PairSpectrum>,
    groups: Vec<SpectrumGroup>,
    xi: f64,
    zero_eigs: Vec<f64>,
}

impl DistanceSpectrum {
    pub fn compute(cb: &Codebook) -> Self {
        let size = cb.codewords().len();
        let n_r = cb.n_r();
        let mut pairs = Vec::with_capacity(size * (size - 1) / 2);
        let mut grouped: HashMap<Vec<i64>, (Vec<f64>, usize)> = HashMap::new();
        let mut xi_sum = 0.0;
        for a in 0..size {
            for b in (a + 1)..size {
                let delta = cb.codeword(a).sub(cb.codeword(b));
                let gram = delta.mul(&delta.hermitian());
                let eig = hermitian_eigenvalues(&gram, 1e-12);
                let product: f64 = eig.iter().product();
                // The unordered pair stands for both ordered directions.
                xi_sum += 2.0 * product;
                let key: Vec<i64> = eig.iter().map(|&v| (v * 1e9).round() as i64).collect();
                grouped
                    .entry(key)
                    .and_modify(|e| e.1 += 2)
                    .or_insert((eig.clone(), 2));
                pairs.push(PairSpectrum {
                    a,
                    b,
                    eigenvalues: eig,
                    lambda_product: product,
                });
            }
        }
        let mut groups: Vec<SpectrumGroup> = grouped
            .into_values()
            .map(|(eigenvalues, count)| SpectrumGroup {
                eigenvalues,
                pairs_per_reference: count as f64 / size as f64,
            })
            .collect();
        groups.sort_by(|x, y| y.eigenvalues[0].partial_cmp(&x.eigenvalues[0]).unwrap());
        Self {
            n_r,
            size,
            pairs,
            groups,
            xi: xi_sum / size as f64,
            zero_eigs: vec![0.0; n_r],
        }
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn codebook_size(&self) -> usize {
        self.size
    }

    /// One entry per unordered codeword pair.
    pub fn pairs(&self) -> &[PairSpectrum] {
        &self.pairs
    }

    pub fn groups(&self) -> &[SpectrumGroup] {
        &self.groups
    }

    /// Sum of eigenvalue products over competing codewords, averaged over the
    /// reference codeword.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Eigenvalues for an (ordered) codeword pair; zeros when `a == b`.
    pub fn pair_eigenvalues(&self, a: usize, b: usize) -> &[f64] {
        if a == b {
            return &self.zero_eigs;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        // Unordered pairs are laid out row-major over the strict upper
        // triangle.
        let idx = lo * self.size - lo * (lo + 1) / 2 + (hi - lo - 1);
        &self.pairs[idx].eigenvalues
    }
}

/// Maximum-likelihood decoding of one received relay-phase block: the symbol
/// tuple whose codeword minimizes ‖Y − √(P_R/N_R)·H·X‖²_F, ties resolved to
/// the lowest codeword index.
pub fn ml_decode(
    y: &CMat,
    h: &CMat,
    cb: &Codebook,
    p_r: f64,
    n0: f64,
) -> Result<Vec<usize>, StbcError> {
    if y.rows() != h.rows() || h.cols() != cb.n_r() || y.cols() != cb.t2() {
        return Err(StbcError::DimensionMismatch);
    }
    let amp = (p_r / cb.n_r() as f64).sqrt();
    let mut best = 0;
    let mut best_metric = f64::INFINITY;
    for (idx, x) in cb.codewords().iter().enumerate() {
        let predicted = h.mul(x).scale(amp);
        let metric = y.sub(&predicted).frob_sq() / n0;
        if metric < best_metric {
            best_metric = metric;
            best = idx;
        }
    }
    Ok(cb.tuple(best))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codebook_sizes_and_durations() {
        let cb = Codebook::new(2, 4).unwrap();
        assert_eq!(cb.codewords().len(), 16);
        assert_eq!(cb.t2(), 2);
        assert_eq!(cb.symbols_per_codeword(), 2);

        let cb = Codebook::new(3, 4).unwrap();
        assert_eq!(cb.codewords().len(), 256);
        assert_eq!(cb.t2(), 8);
        assert_eq!(cb.symbols_per_codeword(), 4);

        let cb = Codebook::new(4, 2).unwrap();
        assert_eq!(cb.codewords().len(), 16);
        assert!((cb.rate_internal() - 0.5).abs() < 1e-15);

        assert!(matches!(
            Codebook::new(5, 4),
            Err(StbcError::UnsupportedStbcSize(5))
        ));
    }

    #[test]
    fn codewords_are_orthogonal_designs() {
        for (n_r, m) in [(2usize, 2u32), (2, 4), (3, 2), (4, 2)] {
            let cb = Codebook::new(n_r, m).unwrap();
            for x in cb.codewords() {
                let gram = x.mul(&x.hermitian());
                let c = gram.get(0, 0).re;
                for i in 0..n_r {
                    for j in 0..n_r {
                        let expect = if i == j {
                            Complex64::new(c, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                        assert!(
                            (gram.get(i, j) - expect).norm() < 1e-12,
                            "n_r={n_r} not orthogonal"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn energy_normalization_holds() {
        for (n_r, m) in [(2usize, 4u32), (3, 4), (4, 4)] {
            let cb = Codebook::new(n_r, m).unwrap();
            let mean: f64 = cb
                .codewords()
                .iter()
                .map(|x| x.frob_sq() / (n_r * cb.t2()) as f64)
                .sum::<f64>()
                / cb.codewords().len() as f64;
            assert!((mean - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tuple_index_round_trip() {
        let cb = Codebook::new(3, 4).unwrap();
        for idx in [0usize, 1, 17, 255] {
            assert_eq!(cb.index_of(&cb.tuple(idx)), idx);
        }
    }

    #[test]
    fn pair_gram_eigenvalues_equal_for_orthogonal_designs() {
        let cb = Codebook::new(2, 4).unwrap();
        let spec = DistanceSpectrum::compute(&cb);
        for p in spec.pairs() {
            assert!((p.eigenvalues[0] - p.eigenvalues[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn eigenvalue_sum_matches_pair_distance() {
        let cb = Codebook::new(3, 2).unwrap();
        let spec = DistanceSpectrum::compute(&cb);
        for p in spec.pairs() {
            let d = cb.codeword(p.a).sub(cb.codeword(p.b)).frob_sq();
            let s: f64 = p.eigenvalues.iter().sum();
            assert!((d - s).abs() < 1e-9 * d.max(1.0));
        }
    }

    #[test]
    fn alamouti_qpsk_minimum_product_is_four() {
        let cb = Codebook::new(2, 4).unwrap();
        let spec = DistanceSpectrum::compute(&cb);
        let min_nonzero = spec
            .pairs()
            .iter()
            .map(|p| p.lambda_product)
            .filter(|&v| v > 1e-9)
            .fold(f64::INFINITY, f64::min);
        assert!((min_nonzero - 4.0).abs() < 1e-9, "{min_nonzero}");
    }

    #[test]
    fn xi_matches_determinant_enumeration_bpsk() {
        // 2x2 Gram: eigenvalue product equals the determinant.
        let cb = Codebook::new(2, 2).unwrap();
        let spec = DistanceSpectrum::compute(&cb);
        let n = cb.codewords().len();
        let mut xi_ref = 0.0;
        for b in 1..n {
            let delta = cb.codeword(0).sub(cb.codeword(b));
            let g = delta.mul(&delta.hermitian());
            let det = (g.get(0, 0) * g.get(1, 1) - g.get(0, 1) * g.get(1, 0)).re;
            xi_ref += det;
        }
        // Geometrically uniform set: the reference average equals any row.
        assert!((spec.xi() - xi_ref).abs() < 1e-9 * xi_ref.max(1.0));
    }

    #[test]
    fn group_multiplicities_cover_all_pairs() {
        let cb = Codebook::new(2, 4).unwrap();
        let spec = DistanceSpectrum::compute(&cb);
        let total: f64 = spec.groups().iter().map(|g| g.pairs_per_reference).sum();
        assert!((total - 15.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn ml_decode_clean_reception() {
        let cb = Codebook::new(2, 4).unwrap();
        let h = CMat::from_fn(1, 2, |_, j| Complex64::new(0.4 + j as f64, -0.3));
        let p_r = 2.0;
        let amp = (p_r / 2.0f64).sqrt();
        let y = h.mul(cb.codeword(7)).scale(amp);
        assert_eq!(ml_decode(&y, &h, &cb, p_r, 1.0).unwrap(), cb.tuple(7));
    }

    #[test]
    fn ml_decode_zero_channel_ties_to_first() {
        let cb = Codebook::new(2, 4).unwrap();
        let h = CMat::zeros(1, 2);
        let y = CMat::from_fn(1, 2, |_, j| Complex64::new(j as f64, 1.0));
        assert_eq!(ml_decode(&y, &h, &cb, 1.0, 1.0).unwrap(), cb.tuple(0));
    }

    #[test]
    fn ml_decode_rejects_dimension_mismatch() {
        let cb = Codebook::new(2, 4).unwrap();
        let h = CMat::zeros(1, 3);
        let y = CMat::zeros(1, 2);
        assert!(matches!(
            ml_decode(&y, &h, &cb, 1.0, 1.0),
            Err(StbcError::DimensionMismatch)
        ));
    }
}
