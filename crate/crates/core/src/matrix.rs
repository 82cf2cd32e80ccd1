//! Dense complex matrices, row-major storage.
//!
//! This is the storage layer for everything built on truncated Fock spaces:
//! dimensions stay in the hundreds, so a straightforward dense kernel with a
//! cyclic-Jacobi Hermitian eigensolver covers all needs. Sparse fast paths
//! live in [`crate::sparse`] and are validated against this module.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.nrows, self.ncols)?;
        for i in 0..self.nrows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.ncols.min(8) {
                let z = self[(i, j)];
                write!(f, "{:+.3}{:+.3}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.ncols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.ncols + j]
    }
}

impl CMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![Complex64::new(0.0, 0.0); nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), ncols, "ragged rows");
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn scale_mut(&mut self, s: Complex64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: Complex64, other: &Self) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "dimension mismatch in matmul");
        let mut out = Self::zeros(self.nrows, other.ncols);
        // ikj loop order keeps the inner accesses contiguous for row-major data.
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let aik = self[(i, k)];
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.ncols..(k + 1) * other.ncols];
                let orow = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.ncols, x.len());
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        for i in 0..self.nrows {
            let row = self.row(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[i] = acc;
        }
        y
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Entrywise complex conjugate (no transpose).
    pub fn conjugate(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.conj();
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square());
        (0..self.nrows).map(|i| self[(i, i)]).sum()
    }

    /// Kronecker product, subsystem 0 as the leftmost (most significant) factor.
    pub fn kron(&self, other: &Self) -> Self {
        let (m, n) = (self.nrows, self.ncols);
        let (p, q) = (other.nrows, other.ncols);
        let mut out = Self::zeros(m * p, n * q);
        for i in 0..m {
            for j in 0..n {
                let a = self[(i, j)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for k in 0..p {
                    for l in 0..q {
                        out[(i * p + k, j * q + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |A - A^+|` over entries; 0 for exactly Hermitian matrices.
    pub fn hermiticity_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for j in i..self.ncols {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() < tol
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues (ascending) and the unitary whose columns are the
    /// corresponding eigenvectors. Input must be Hermitian; only the upper
    /// triangle is referenced through the symmetrized working copy.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, CMatrix) {
        assert!(self.is_square());
        let n = self.nrows;
        // Work on the explicitly symmetrized matrix so tiny defects don't bias sweeps.
        let mut a = CMatrix::from_fn(n, n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)].conj()));
        let mut v = CMatrix::identity(n);

        let off = |a: &CMatrix| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += a[(i, j)].norm_sqr();
                }
            }
            s.sqrt()
        };

        let scale = self.max_abs().max(1e-300);
        let tol = 1e-14 * scale * (n as f64);
        for _sweep in 0..100 {
            if off(&a) <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.norm() <= tol / (n as f64).max(1.0) {
                        continue;
                    }
                    // Unitary plane rotation diagonalizing the 2x2 Hermitian block.
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let abs_apq = apq.norm();
                    let phase = apq / abs_apq; // e^{i phi}
                    let theta = 0.5 * (2.0 * abs_apq).atan2(aqq - app);
                    let c = theta.cos();
                    let s = theta.sin();
                    // Columns transform: col_p' = c*col_p - s*conj(phase)*col_q,
                    //                    col_q' = s*phase*col_p + c*col_q.
                    let sp = s * phase;
                    let spc = s * phase.conj();
                    for i in 0..n {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = c * aip - spc * aiq;
                        a[(i, q)] = sp * aip + c * aiq;
                    }
                    for j in 0..n {
                        let apj = a[(p, j)];
                        let aqj = a[(q, j)];
                        a[(p, j)] = c * apj - sp * aqj;
                        a[(q, j)] = spc * apj + c * aqj;
                    }
                    for i in 0..n {
                        let vip = v[(i, p)];
                        let viq = v[(i, q)];
                        v[(i, p)] = c * vip - spc * viq;
                        v[(i, q)] = sp * vip + c * viq;
                    }
                }
            }
        }

        let mut eig: Vec<(f64, usize)> = (0..n).map(|i| (a[(i, i)].re, i)).collect();
        eig.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let values: Vec<f64> = eig.iter().map(|e| e.0).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for (newcol, &(_, oldcol)) in eig.iter().enumerate() {
            for i in 0..n {
                vectors[(i, newcol)] = v[(i, oldcol)];
            }
        }
        (values, vectors)
    }

    /// Singular values in descending order, by one-sided Jacobi: unitary
    /// right rotations orthogonalize column pairs until the Gram matrix is
    /// diagonal; the column norms are then the singular values. Small
    /// singular values come out with high relative accuracy (no squaring
    /// through an eigenproblem), which the concurrence evaluation depends on.
    pub fn singular_values(&self) -> Vec<f64> {
        let n = self.ncols;
        let mut a = self.clone();
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let mut gpp = 0.0f64;
                    let mut gqq = 0.0f64;
                    let mut gpq = Complex64::new(0.0, 0.0);
                    for i in 0..self.nrows {
                        let ap = a[(i, p)];
                        let aq = a[(i, q)];
                        gpp += ap.norm_sqr();
                        gqq += aq.norm_sqr();
                        gpq += ap.conj() * aq;
                    }
                    let abs = gpq.norm();
                    if abs <= 1e-300 + 1e-15 * (gpp * gqq).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let phase = gpq / abs;
                    let theta = 0.5 * (2.0 * abs).atan2(gqq - gpp);
                    let c = theta.cos();
                    let s = theta.sin();
                    let sp = s * phase;
                    let spc = s * phase.conj();
                    for i in 0..self.nrows {
                        let ap = a[(i, p)];
                        let aq = a[(i, q)];
                        a[(i, p)] = c * ap - spc * aq;
                        a[(i, q)] = sp * ap + c * aq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<f64> = (0..n)
            .map(|j| (0..self.nrows).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt())
            .collect();
        sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
        sv
    }

    /// Hermitian matrix square root via eigendecomposition. Small negative
    /// eigenvalues (integrator noise) are clamped to zero.
    pub fn hermitian_sqrt(&self) -> CMatrix {
        let (vals, vecs) = self.hermitian_eigen();
        let n = self.nrows;
        let mut out = CMatrix::zeros(n, n);
        for k in 0..n {
            let lam = vals[k].max(0.0).sqrt();
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += Complex64::new(lam, 0.0) * vecs[(i, k)] * vecs[(j, k)].conj();
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matmul_identity() {
        let a = CMatrix::from_fn(3, 3, |i, j| c((i * 3 + j) as f64, (i + j) as f64));
        let id = CMatrix::identity(3);
        assert_eq!(a.matmul(&id), a);
        assert_eq!(id.matmul(&a), a);
    }

    #[test]
    fn adjoint_involution() {
        let a = CMatrix::from_fn(4, 4, |i, j| c(i as f64 - j as f64, (i * j) as f64));
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn kron_ordering() {
        // kron(A, B): subsystem 0 (A) is the most significant index.
        let sz = CMatrix::from_rows(&[&[c(1.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(-1.0, 0.0)]]);
        let id = CMatrix::identity(2);
        let m = sz.kron(&id);
        let d: Vec<f64> = (0..4).map(|i| m[(i, i)].re).collect();
        assert_eq!(d, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn trace_of_product_cyclic() {
        let a = CMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, j as f64));
        let b = CMatrix::from_fn(3, 3, |i, j| c(1.0, (i as f64) - (j as f64)));
        let t1 = a.matmul(&b).trace();
        let t2 = b.matmul(&a).trace();
        assert_relative_eq!(t1.re, t2.re, epsilon = 1e-12);
        assert_relative_eq!(t1.im, t2.im, epsilon = 1e-12);
    }

    #[test]
    fn hermitian_eigen_known_2x2() {
        // Pauli X: eigenvalues -1, +1.
        let x = CMatrix::from_rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)]]);
        let (vals, vecs) = x.hermitian_eigen();
        assert_relative_eq!(vals[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-12);
        // Reconstruct.
        let mut rec = CMatrix::zeros(2, 2);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    rec[(i, j)] += c(vals[k], 0.0) * vecs[(i, k)] * vecs[(j, k)].conj();
                }
            }
        }
        assert!(rec.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn hermitian_eigen_reconstructs_random() {
        // Pseudo-random Hermitian from a fixed recurrence; reconstruction to 1e-11.
        let n = 12;
        let mut seed = 0x12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let z = if i == j { c(next(), 0.0) } else { c(next(), next()) };
                a[(i, j)] = z;
                a[(j, i)] = z.conj();
            }
        }
        let (vals, vecs) = a.hermitian_eigen();
        let mut rec = CMatrix::zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    rec[(i, j)] += c(vals[k], 0.0) * vecs[(i, k)] * vecs[(j, k)].conj();
                }
            }
        }
        assert!(rec.max_abs_diff(&a) < 1e-11, "defect {}", rec.max_abs_diff(&a));
        // Unitarity of eigenvector matrix.
        let vv = vecs.adjoint().matmul(&vecs);
        assert!(vv.max_abs_diff(&CMatrix::identity(n)) < 1e-11);
    }

    #[test]
    fn singular_values_of_known_matrix() {
        // diag(3, 2i, 0) has singular values 3, 2, 0.
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = c(3.0, 0.0);
        m[(1, 1)] = c(0.0, 2.0);
        let sv = m.singular_values();
        assert_relative_eq!(sv[0], 3.0, epsilon = 1e-13);
        assert_relative_eq!(sv[1], 2.0, epsilon = 1e-13);
        assert!(sv[2] < 1e-14);

        // Rank-1 outer product: one singular value = |u||v|.
        let u = [c(1.0, 2.0), c(0.5, -0.3), c(0.0, 1.0)];
        let v = [c(2.0, 0.0), c(-1.0, 1.0)];
        let m = CMatrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        let sv = m.singular_values();
        let nu: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert_relative_eq!(sv[0], nu * nv, epsilon = 1e-12);
        assert!(sv[1] < 1e-14 * sv[0].max(1.0));
    }

    #[test]
    fn hermitian_sqrt_squares_back() {
        let a = CMatrix::from_rows(&[
            &[c(2.0, 0.0), c(0.5, 0.5)],
            &[c(0.5, -0.5), c(1.0, 0.0)],
        ]);
        let s = a.hermitian_sqrt();
        assert!(s.matmul(&s).max_abs_diff(&a) < 1e-12);
    }
}
