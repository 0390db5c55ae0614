//! Dense and sparse complex matrices used throughout the crate.
//!
//! Everything is row-major with `Complex64` entries. The dense type is what
//! the public operator/state types wrap; the sparse type exists so that the
//! Lindblad right-hand side can be applied in `O(nnz * dim)` instead of
//! `O(dim^3)`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
// inherent float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Square dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C64::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(*d, 0.0);
        }
        m
    }

    /// Build from a row-major buffer of length `n*n`.
    pub fn from_vec(n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
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

    /// `|psi><phi|`
    pub fn outer(psi: &[C64], phi: &[C64]) -> Self {
        assert_eq!(psi.len(), phi.len());
        Self::from_fn(psi.len(), |i, j| psi[i] * phi[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                let rrow = &rhs.data[k * n..(k + 1) * n];
                for (o, r) in orow.iter_mut().zip(rrow) {
                    *o += a * r;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.n, v.len());
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `[A, B] = AB - BA`
    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    /// `Tr[A B]` without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> C64 {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut acc = C64::zero();
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * rhs.data[k * n + i];
            }
        }
        acc
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (na, nb) = (self.n, rhs.n);
        let n = na * nb;
        let mut out = Self::zeros(n);
        for i1 in 0..na {
            for j1 in 0..na {
                let a = self[(i1, j1)];
                if a.is_zero() {
                    continue;
                }
                for i2 in 0..nb {
                    for j2 in 0..nb {
                        out[(i1 * nb + i2, j1 * nb + j2)] = a * rhs[(i2, j2)];
                    }
                }
            }
        }
        out
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max_ij |A_ij - conj(A_ji)|`
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Replace by `(A + A†)/2`.
    pub fn hermitize(&mut self) {
        let n = self.n;
        for i in 0..n {
            self.data[i * n + i].im = 0.0;
            for j in (i + 1)..n {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..n).all(|j| i == j || self[(i, j)].is_zero()))
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    /// Eigen-decomposition of a Hermitian matrix. Eigenvalues are returned in
    /// descending order; column `k` of the returned matrix is the eigenvector
    /// for eigenvalue `k`.
    pub fn hermitian_eigen(&self) -> Result<HermitianEigen> {
        let mut m = self.to_nalgebra();
        // symmetrize so that tiny rounding asymmetries do not leak in
        let mt = m.adjoint();
        m = (m + mt) * C64::new(0.5, 0.0);
        let eig = m
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or(Error::EigenNonConvergence)?;
        let n = self.n;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        Ok(HermitianEigen { values, vectors })
    }

    /// Smallest eigenvalue of a Hermitian matrix.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let e = self.hermitian_eigen()?;
        Ok(e.values.last().copied().unwrap_or(0.0))
    }

    /// Returns true when `A + shift·1` admits a Cholesky factorisation, i.e.
    /// when the smallest eigenvalue of the Hermitian matrix `A` exceeds
    /// `-shift` (up to rounding).
    pub fn is_psd_with_shift(&self, shift: f64) -> bool {
        let n = self.n;
        let mut l = vec![C64::zero(); n * n];
        for j in 0..n {
            let mut d = self[(j, j)].re + shift;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) {
                return false;
            }
            let djj = d.sqrt();
            l[j * n + j] = C64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        true
    }

    /// Trace norm `‖A‖₁` of a Hermitian matrix (sum of absolute eigenvalues).
    pub fn trace_norm_hermitian(&self) -> Result<f64> {
        Ok(self.hermitian_eigen()?.values.iter().map(|v| v.abs()).sum())
    }
}

/// Result of [`CMatrix::hermitian_eigen`].
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        CMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        CMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// Compressed-row sparse square matrix.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    /// Drops exact zeros from a dense matrix.
    pub fn from_dense(m: &CMatrix) -> Self {
        let n = m.dim();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if !v.is_zero() {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b]
            .iter()
            .copied()
            .zip(self.vals[a..b].iter().copied())
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::zero();
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            *yi = acc;
        }
    }

    /// `out = A B` for dense row-major `B` (n×n).
    pub fn mul_dense_into(&self, b: &[C64], out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let orow = &mut out[i * n..(i + 1) * n];
            orow.iter_mut().for_each(|z| *z = C64::zero());
            for (k, a) in self.row(i) {
                let brow = &b[k * n..(k + 1) * n];
                for (o, x) in orow.iter_mut().zip(brow) {
                    *o += a * x;
                }
            }
        }
    }

    /// `out += A B A†` for dense row-major Hermitian `B`; `scratch` holds `A B`.
    pub fn add_sandwich_into(&self, b: &[C64], scratch: &mut [C64], out: &mut [C64]) {
        let n = self.n;
        self.mul_dense_into(b, scratch);
        // (A B A†)_ij = Σ_l (AB)_il conj(A_jl)
        for i in 0..n {
            let srow = &scratch[i * n..(i + 1) * n];
            for j in 0..n {
                let mut acc = C64::zero();
                for (l, a) in self.row(j) {
                    acc += srow[l] * a.conj();
                }
                out[i * n + j] += acc;
            }
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<a|b>`
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> CMatrix {
        CMatrix::from_fn(n, |i, j| {
            c((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.05)
        })
    }

    #[test]
    fn sparse_products_match_dense() {
        let mut a = sample(5);
        a[(1, 2)] = C64::zero();
        a[(4, 0)] = C64::zero();
        let mut b = sample(5);
        b.hermitize();
        let s = SparseMatrix::from_dense(&a);
        // (0,0) of the sample is zero as well
        assert_eq!(s.nnz(), 22);
        let mut out = vec![C64::zero(); 25];
        s.mul_dense_into(b.as_slice(), &mut out);
        let dense = a.matmul(&b);
        for (x, y) in out.iter().zip(dense.as_slice()) {
            assert!((x - y).norm() < 1e-13);
        }
        let mut scratch = vec![C64::zero(); 25];
        let mut sand = vec![C64::zero(); 25];
        s.add_sandwich_into(b.as_slice(), &mut scratch, &mut sand);
        let expected = a.matmul(&b).matmul(&a.dagger());
        for (x, y) in sand.iter().zip(expected.as_slice()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn eigen_sorted_descending_and_orthonormal() {
        let mut h = sample(6);
        h.hermitize();
        let e = h.hermitian_eigen().unwrap();
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for a in 0..6 {
            for b in 0..6 {
                let ip = inner(&e.vectors[a], &e.vectors[b]);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - c(expect, 0.0)).norm() < 1e-10);
            }
        }
        // reconstruct
        let mut rec = CMatrix::zeros(6);
        for (v, vec) in e.values.iter().zip(&e.vectors) {
            rec += &CMatrix::outer(vec, vec).scale_real(*v);
        }
        assert!((&rec - &h).max_abs() < 1e-12);
    }

    #[test]
    fn cholesky_shift_detects_negative_eigenvalue() {
        let m = CMatrix::from_real_diagonal(&[1.0, 0.5, -1e-6]);
        assert!(!m.is_psd_with_shift(1e-8));
        assert!(m.is_psd_with_shift(1e-5));
        let p = CMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]);
        assert!(p.is_psd_with_shift(1e-8));
    }

    #[test]
    fn kron_of_identities() {
        let a = CMatrix::identity(3);
        let b = CMatrix::identity(4);
        assert_eq!(a.kron(&b), CMatrix::identity(12));
    }
}
