//! Compressed sparse row matrices over Complex64.
//!
//! Fast path for trajectory integration: the built Hamiltonians have a
//! handful of nonzeros per row. Dense [`CMatrix`] defines semantics; every
//! sparse apply is validated against the dense product in tests.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::matrix::CMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn from_dense(m: &CMatrix, drop_tol: f64) -> Self {
        assert!(m.is_square());
        let dim = m.nrows();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for j in 0..dim {
                let v = m[(i, j)];
                if v.norm() > drop_tol {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    /// y = A x
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    /// y += s * A x
    pub fn matvec_acc(&self, s: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] += s * acc;
        }
    }

    /// OUT = A * C for dense row-major C.
    pub fn mul_dense(&self, c: &CMatrix, out: &mut CMatrix) {
        let n = c.ncols();
        debug_assert_eq!(c.nrows(), self.dim);
        out.as_mut_slice().fill(Complex64::new(0.0, 0.0));
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.vals[k];
                let col = self.cols[k];
                let src = &c.as_slice()[col * n..(col + 1) * n];
                let dst = &mut out.as_mut_slice()[i * n..(i + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
    }

    /// OUT += s * C * A for dense row-major C.
    pub fn mul_dense_right_acc(&self, s: Complex64, c: &CMatrix, out: &mut CMatrix) {
        let nrows = c.nrows();
        let n = c.ncols();
        debug_assert_eq!(n, self.dim);
        // out[i,j] += s * sum_k C[i,k] A[k,j]; iterate A entries (k -> j).
        for k in 0..self.dim {
            for p in self.row_ptr[k]..self.row_ptr[k + 1] {
                let j = self.cols[p];
                let v = s * self.vals[p];
                for i in 0..nrows {
                    let cik = c.as_slice()[i * n + k];
                    out.as_mut_slice()[i * n + j] += v * cik;
                }
            }
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= s;
        }
        out
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{fock_destroy, fock_number};
    use alloc::vec;

    #[test]
    fn round_trip_and_matvec() {
        let a = fock_destroy(6).unwrap();
        let s = CsrMatrix::from_dense(&a, 0.0);
        assert_eq!(s.nnz(), 5);
        assert!(s.to_dense().max_abs_diff(&a) == 0.0);

        let x: Vec<Complex64> =
            (0..6).map(|i| Complex64::new(i as f64, -(i as f64) / 2.0)).collect();
        let mut y = vec![Complex64::new(0.0, 0.0); 6];
        s.matvec(&x, &mut y);
        let yd = a.matvec(&x);
        for (u, v) in y.iter().zip(&yd) {
            assert!((u - v).norm() < 1e-14);
        }
    }

    #[test]
    fn dense_products_match() {
        let a = fock_destroy(5).unwrap();
        let n = fock_number(5).unwrap();
        let sa = CsrMatrix::from_dense(&a, 0.0);

        let mut out = CMatrix::zeros(5, 5);
        sa.mul_dense(&n, &mut out);
        assert!(out.max_abs_diff(&a.matmul(&n)) < 1e-14);

        let mut acc = CMatrix::zeros(5, 5);
        sa.mul_dense_right_acc(Complex64::new(2.0, 0.0), &n, &mut acc);
        assert!(acc.max_abs_diff(&n.matmul(&a).scale(Complex64::new(2.0, 0.0))) < 1e-14);
    }
}
