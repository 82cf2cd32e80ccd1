//! Operators on composite layouts: ladder operators on truncated Fock spaces,
//! qubit Paulis, and tensor-product lifting (`embed`).

use alloc::vec::Vec;
use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::HilbertLayout;
use crate::matrix::CMatrix;

/// A square operator tied to a [`HilbertLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    layout: HilbertLayout,
    matrix: CMatrix,
}

impl OperatorMatrix {
    pub fn new(layout: HilbertLayout, matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                got: matrix.nrows(),
            });
        }
        Ok(Self { layout, matrix })
    }

    pub fn identity(layout: HilbertLayout) -> Self {
        let d = layout.total_dim();
        Self { layout, matrix: CMatrix::identity(d) }
    }

    pub fn zeros(layout: HilbertLayout) -> Self {
        let d = layout.total_dim();
        Self { layout, matrix: CMatrix::zeros(d, d) }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn same_layout(&self, other: &Self) -> Result<()> {
        if self.layout == other.layout {
            Ok(())
        } else {
            Err(Error::LayoutMismatch)
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_layout(other)?;
        Ok(Self { layout: self.layout.clone(), matrix: self.matrix.matmul(&other.matrix) })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_layout(other)?;
        Ok(Self { layout: self.layout.clone(), matrix: self.matrix.add(&other.matrix) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_layout(other)?;
        Ok(Self { layout: self.layout.clone(), matrix: self.matrix.sub(&other.matrix) })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { layout: self.layout.clone(), matrix: self.matrix.scale(s) }
    }

    pub fn adjoint(&self) -> Self {
        Self { layout: self.layout.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.same_layout(other)?;
        Ok(Self { layout: self.layout.clone(), matrix: self.matrix.commutator(&other.matrix) })
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.matrix.is_hermitian(tol)
    }
}

/// Truncated lowering operator: entries sqrt(n) on the first superdiagonal.
pub fn fock_destroy(dim: usize) -> Result<CMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// Truncated raising operator.
pub fn fock_create(dim: usize) -> Result<CMatrix> {
    Ok(fock_destroy(dim)?.adjoint())
}

/// Number operator diag(0, 1, ..., dim-1).
pub fn fock_number(dim: usize) -> Result<CMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// Photon-number parity diag((-1)^n), i.e. exp(i pi a^+a).
pub fn fock_parity(dim: usize) -> Result<CMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

pub fn sigma_x() -> CMatrix {
    let o = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    CMatrix::from_rows(&[&[z, o], &[o, z]])
}

pub fn sigma_y() -> CMatrix {
    let z = Complex64::new(0.0, 0.0);
    CMatrix::from_rows(&[&[z, Complex64::new(0.0, -1.0)], &[Complex64::new(0.0, 1.0), z]])
}

/// Pauli Z with sigma_z|0> = +|0>.
pub fn sigma_z() -> CMatrix {
    CMatrix::from_real_diag(&[1.0, -1.0])
}

/// Lift a local operator into the composite space at `slot`:
/// identity (x) ... (x) op (x) ... (x) identity under the qubits-first,
/// big-endian ordering.
pub fn embed(op: &CMatrix, slot: usize, layout: &HilbertLayout) -> Result<OperatorMatrix> {
    let local_dim = layout.subsystem_dim(slot)?;
    if !op.is_square() || op.nrows() != local_dim {
        return Err(Error::DimensionMismatch { expected: local_dim, got: op.nrows() });
    }
    let left: usize = (0..slot).map(|s| layout.subsystem_dim(s).unwrap()).product();
    let right: usize = (slot + 1..layout.subsystem_count())
        .map(|s| layout.subsystem_dim(s).unwrap())
        .product();
    let total = layout.total_dim();
    let mut out = CMatrix::zeros(total, total);
    for l in 0..left {
        for i in 0..local_dim {
            for j in 0..local_dim {
                let v = op[(i, j)];
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let row_base = (l * local_dim + i) * right;
                let col_base = (l * local_dim + j) * right;
                for r in 0..right {
                    out[(row_base + r, col_base + r)] = v;
                }
            }
        }
    }
    OperatorMatrix::new(layout.clone(), out)
}

/// Lowering operator of bosonic mode `mode`, lifted to the composite space.
pub fn destroy_on(layout: &HilbertLayout, mode: usize) -> Result<OperatorMatrix> {
    let slot = layout.mode_slot(mode)?;
    let local = fock_destroy(layout.subsystem_dim(slot)?)?;
    embed(&local, slot, layout)
}

/// Number operator of bosonic mode `mode`, lifted to the composite space.
pub fn number_on(layout: &HilbertLayout, mode: usize) -> Result<OperatorMatrix> {
    let slot = layout.mode_slot(mode)?;
    let local = fock_number(layout.subsystem_dim(slot)?)?;
    embed(&local, slot, layout)
}

/// sigma_z of qubit `qubit`, lifted to the composite space.
pub fn sigma_z_on(layout: &HilbertLayout, qubit: usize) -> Result<OperatorMatrix> {
    if qubit >= layout.qubit_count() {
        return Err(Error::SlotOutOfRange { slot: qubit, count: layout.qubit_count() });
    }
    embed(&sigma_z(), qubit, layout)
}

/// Extract the mode-space block of a qubit-diagonal composite operator at the
/// given qubit basis index. Errors if the operator couples different qubit
/// basis states.
pub fn qubit_diagonal_block(op: &OperatorMatrix, qubit_index: usize) -> Result<CMatrix> {
    let layout = op.layout();
    let nq = layout.qubit_count();
    let qdim = 1usize << nq;
    if qubit_index >= qdim {
        return Err(Error::SlotOutOfRange { slot: qubit_index, count: qdim });
    }
    let mode_dim = layout.total_dim() / qdim;
    let m = op.matrix();
    // Verify block-diagonality in the qubit register.
    for qi in 0..qdim {
        for qj in 0..qdim {
            if qi == qj {
                continue;
            }
            for i in 0..mode_dim {
                for j in 0..mode_dim {
                    let v = m[(qi * mode_dim + i, qj * mode_dim + j)];
                    if v.norm() > 1e-12 {
                        return Err(Error::InvalidParameter(alloc::format!(
                            "operator couples qubit basis states {qi} and {qj}"
                        )));
                    }
                }
            }
        }
    }
    let base = qubit_index * mode_dim;
    Ok(CMatrix::from_fn(mode_dim, mode_dim, |i, j| m[(base + i, base + j)]))
}

/// All per-mode top-two-level projectors, used by the truncation-tail monitor.
pub fn tail_projector_diag(layout: &HilbertLayout) -> Vec<f64> {
    let total = layout.total_dim();
    let mut diag = alloc::vec![0.0f64; total];
    for idx in 0..total {
        let digits = layout.digits(idx);
        for m in 0..layout.mode_count() {
            let slot = layout.mode_slot(m).unwrap();
            let dim = layout.subsystem_dim(slot).unwrap();
            if digits[slot] + 2 >= dim {
                diag[idx] = 1.0;
                break;
            }
        }
    }
    diag
}
