//! Dense complex linear algebra at small fixed dimensions.
//!
//! Matrices are square and stored row-major. Everything here is sized for
//! dimensions up to a few hundred; there is no blocking or SIMD.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, actual: data.len() });
        }
        Ok(Self { n, data })
    }

    /// `|v⟩⟨v|`
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    /// Permutation matrix sending basis vector `j` to `perm[j]`.
    pub fn permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut m = Self::zeros(n);
        for (j, &i) in perm.iter().enumerate() {
            m[(i, j)] = ONE;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.n, v.len(), "apply dimension mismatch");
        (0..self.n).map(|i| dot_plain(self.row(i), v)).collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn add_assign_scaled(&mut self, rhs: &Self, s: f64) {
        assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b * s;
        }
    }

    /// `⟨v|M|v⟩`, real part.
    pub fn quadratic_form(&self, v: &[C64]) -> f64 {
        inner(v, &self.apply(v)).re
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        let m = self.data.iter().zip(&rhs.data).map(|(a, b)| (a - b).norm_sqr()).fold(0.0, f64::max);
        libm::sqrt(m)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn unitary_deviation(&self) -> f64 {
        self.matmul(&self.adjoint()).max_abs_diff(&Self::identity(self.n))
    }

    /// Largest deviation from `P = P†` and `P² = P`.
    pub fn projector_deviation(&self) -> f64 {
        self.hermitian_deviation().max(self.matmul(self).max_abs_diff(self))
    }

    /// `self ⊗ rhs`
    pub fn kron(&self, rhs: &Self) -> Self {
        let (a, b) = (self.n, rhs.n);
        Self::from_fn(a * b, |i, j| self[(i / b, j / b)] * rhs[(i % b, j % b)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

fn dot_plain(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x * y)
}

/// `⟨a|b⟩`, antilinear in the first argument.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    libm::sqrt(norm_sqr(v))
}

pub fn scaled(v: &[C64], s: C64) -> Vec<C64> {
    v.iter().map(|z| z * s).collect()
}

/// Eigen-decomposition of a Hermitian matrix: ascending real eigenvalues and
/// orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<C64>>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations on a Hermitian matrix.
///
/// Each `(p, q)` rotation first removes the phase of `a_pq` with a diagonal
/// unitary, then applies the real symmetric Jacobi rotation. Converges
/// quadratically; the off-diagonal Frobenius mass is driven below `1e-30`
/// relative to the total.
pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    let n = m.dim();
    let mut a = m.clone();
    // symmetrize away round-off so the rotations see an exactly Hermitian input
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut w = CMatrix::identity(n);
    let total: f64 = a.data.iter().map(|z| z.norm_sqr()).sum();
    let threshold = (total * 1e-30).max(1e-300);

    let mut converged = n < 2;
    for _sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].norm_sqr()).sum();
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag; // e^{iφ}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                // V = diag(1, e^{-iφ}) · [[c, s], [-s, c]] on the (p, q) plane
                let vpp = C64::new(c, 0.0);
                let vpq = C64::new(s, 0.0);
                let vqp = phase.conj() * (-s);
                let vqq = phase.conj() * c;
                rotate_cols(&mut a, p, q, vpp, vpq, vqp, vqq);
                rotate_rows(&mut a, p, q, vpp, vpq, vqp, vqq);
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                rotate_cols(&mut w, p, q, vpp, vpq, vqp, vqq);
            }
        }
    }
    if !converged {
        return Err(Error::EigenNonConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = order.iter().map(|&k| (0..n).map(|i| w[(i, k)]).collect()).collect();
    Ok(HermitianEigen { values, vectors })
}

// M ← M·V restricted to columns p, q.
fn rotate_cols(m: &mut CMatrix, p: usize, q: usize, vpp: C64, vpq: C64, vqp: C64, vqq: C64) {
    for i in 0..m.n {
        let mp = m[(i, p)];
        let mq = m[(i, q)];
        m[(i, p)] = mp * vpp + mq * vqp;
        m[(i, q)] = mp * vpq + mq * vqq;
    }
}

// M ← V†·M restricted to rows p, q.
fn rotate_rows(m: &mut CMatrix, p: usize, q: usize, vpp: C64, vpq: C64, vqp: C64, vqq: C64) {
    for j in 0..m.n {
        let mp = m[(p, j)];
        let mq = m[(q, j)];
        m[(p, j)] = vpp.conj() * mp + vqp.conj() * mq;
        m[(q, j)] = vpq.conj() * mp + vqq.conj() * mq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(e: &HermitianEigen) -> CMatrix {
        let n = e.values.len();
        let mut m = CMatrix::zeros(n);
        for (val, vec) in e.values.iter().zip(&e.vectors) {
            m.add_assign_scaled(&CMatrix::outer(vec), *val);
        }
        m
    }

    #[test]
    fn eigen_of_pauli_y() {
        let y = CMatrix::from_rows(2, vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]).unwrap();
        let e = hermitian_eigen(&y).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        assert!(reconstruct(&e).max_abs_diff(&y) < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for n in [1, 3, 8, 17] {
            let raw = CMatrix::from_fn(n, |_, _| C64::new(next(), next()));
            let h = raw.add(&raw.adjoint());
            let e = hermitian_eigen(&h).unwrap();
            assert!(reconstruct(&e).max_abs_diff(&h) < 1e-10, "n = {n}");
            for i in 0..n {
                for j in 0..n {
                    let ip = inner(&e.vectors[i], &e.vectors[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - C64::new(want, 0.0)).norm() < 1e-10);
                }
            }
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_spectrum_is_handled() {
        let e = hermitian_eigen(&CMatrix::identity(5)).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn kron_and_permutation() {
        let x = CMatrix::permutation(&[1, 0]);
        let xi = x.kron(&CMatrix::identity(2));
        assert_eq!(xi[(2, 0)], ONE);
        assert_eq!(xi[(0, 2)], ONE);
        assert!(xi.unitary_deviation() < 1e-15);
    }
}
