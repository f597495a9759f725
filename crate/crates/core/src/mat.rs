//! Minimal dense complex matrices and a Hermitian eigensolver for the tiny
//! (≤ 4×4) Gram matrices this crate works with.

use num_complex::Complex64;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Build from a function of (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.get(i, j) + a * rhs.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// Element-wise difference `self - rhs`.
    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - rhs.get(i, j))
    }

    /// Scale every entry by a real factor.
    pub fn scale(&self, s: f64) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) * s)
    }

    /// Squared Frobenius norm.
    pub fn frob_sq(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// All entries finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Intended for the small positive semidefinite Gram matrices of codeword
/// differences (size ≤ 4). Returns eigenvalues sorted in descending order;
/// values below `tol` times the matrix scale are clamped to zero.
pub fn hermitian_eigenvalues(a: &CMat, tol: f64) -> Vec<f64> {
    assert_eq!(a.rows, a.cols, "eigenvalues need a square matrix");
    let n = a.rows;
    let mut m = a.clone();
    let scale = m.frob_sq().sqrt().max(1.0);

    let off = |m: &CMat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.get(i, j).norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    for _sweep in 0..100 {
        if off(&m) <= tol * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.norm() <= tol * scale * 1e-2 {
                    continue;
                }
                // Phase factor makes the pivot real, then a real Jacobi
                // rotation annihilates it: U = [[e^{iφ}c, e^{iφ}s], [-s, c]]
                // with φ = arg(a_pq), applied as M <- U^H M U.
                let phase = apq / apq.norm();
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let abs_apq = apq.norm();
                let tau = (aqq - app) / (2.0 * abs_apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let up = phase * c;
                let uq = phase * s;
                for i in 0..n {
                    let mip = m.get(i, p);
                    let miq = m.get(i, q);
                    m.set(i, p, mip * up - miq * s);
                    m.set(i, q, mip * uq + miq * c);
                }
                for j in 0..n {
                    let mpj = m.get(p, j);
                    let mqj = m.get(q, j);
                    m.set(p, j, mpj * up.conj() - mqj * s);
                    m.set(q, j, mpj * uq.conj() + mqj * c);
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n)
        .map(|i| {
            let v = m.get(i, i).re;
            if v.abs() <= tol * scale {
                0.0
            } else {
                v
            }
        })
        .collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn product_and_hermitian() {
        let a = CMat::from_fn(2, 3, |i, j| c((i + j) as f64, i as f64));
        let ah = a.hermitian();
        assert_eq!(ah.rows(), 3);
        assert_eq!(ah.get(2, 1), c(3.0, -1.0));
        let g = a.mul(&ah);
        // Gram matrix is Hermitian with real diagonal.
        for i in 0..2 {
            assert!(g.get(i, i).im.abs() < 1e-15);
            for j in 0..2 {
                assert!((g.get(i, j) - g.get(j, i).conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let mut a = CMat::zeros(3, 3);
        a.set(0, 0, c(2.0, 0.0));
        a.set(1, 1, c(-1.0, 0.0));
        a.set(2, 2, c(5.0, 0.0));
        let e = hermitian_eigenvalues(&a, 1e-12);
        assert!((e[0] - 5.0).abs() < 1e-12);
        assert!((e[1] - 2.0).abs() < 1e-12);
        assert!((e[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_complex_hermitian() {
        // [[2, i],[-i, 2]] has eigenvalues 1 and 3.
        let mut a = CMat::zeros(2, 2);
        a.set(0, 0, c(2.0, 0.0));
        a.set(0, 1, c(0.0, 1.0));
        a.set(1, 0, c(0.0, -1.0));
        a.set(1, 1, c(2.0, 0.0));
        let e = hermitian_eigenvalues(&a, 1e-13);
        assert!((e[0] - 3.0).abs() < 1e-10, "{e:?}");
        assert!((e[1] - 1.0).abs() < 1e-10, "{e:?}");
    }

    #[test]
    fn eigenvalue_sum_matches_trace() {
        // Random-ish Hermitian built as B B^H.
        let b = CMat::from_fn(4, 4, |i, j| c((i as f64 - 1.3) * (j as f64 + 0.7), (i * j) as f64 * 0.31 - 1.0));
        let g = b.mul(&b.hermitian());
        let e = hermitian_eigenvalues(&g, 1e-13);
        let trace: f64 = (0..4).map(|i| g.get(i, i).re).sum();
        let sum: f64 = e.iter().sum();
        assert!((trace - sum).abs() < 1e-9 * trace.abs().max(1.0));
        assert!(e.iter().all(|&v| v >= 0.0));
    }
}
