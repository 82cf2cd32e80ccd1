//! Two-qubit entanglement of measurement-conditioned states.

use alloc::vec::Vec;
use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::CMatrix;
use crate::model::Parity;
use crate::signal::{signal_at, ClassifierModel};
use crate::trajectory::TrajectoryRecord;

/// Qubit state conditioned on the measurement record at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedQubitState {
    pub rho_c: CMatrix,
    pub parity_decision: Parity,
    pub tau: f64,
}

fn sigma_y_sigma_y() -> CMatrix {
    // sigma_y (x) sigma_y = antidiag(-1, 1, 1, -1) in the computational basis.
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 3)] = Complex64::new(-1.0, 0.0);
    m[(1, 2)] = Complex64::new(1.0, 0.0);
    m[(2, 1)] = Complex64::new(1.0, 0.0);
    m[(3, 0)] = Complex64::new(-1.0, 0.0);
    m
}

/// Wootters concurrence of a two-qubit density matrix:
/// `C = max(0, l1 - l2 - l3 - l4)` with l_i the decreasing square roots of
/// the eigenvalues of `rho (sy x sy) rho* (sy x sy)`.
///
/// The l_i are evaluated as the singular values of
/// `sqrt(rho) (sy x sy) sqrt(rho)^T`: with S = sy x sy real symmetric,
/// `A A+ = sqrt(rho) S rho* S sqrt(rho)`, so the singular values of A square
/// to the Wootters eigenvalues while staying accurate near zero (an
/// eigenvalue route loses half the significant digits to the square root,
/// which matters for nearly pure states).
pub fn concurrence(rho: &CMatrix) -> Result<f64> {
    if !rho.is_square() || rho.nrows() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: rho.nrows() });
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-9 {
        return Err(Error::InvalidDensity(alloc::format!("trace {}", tr.re)));
    }
    if !rho.is_hermitian(1e-7) {
        return Err(Error::InvalidDensity(alloc::string::String::from("not Hermitian")));
    }
    let (vals, _) = rho.hermitian_eigen();
    if vals[0] < -1e-8 {
        return Err(Error::InvalidDensity(alloc::format!("eigenvalue {}", vals[0])));
    }

    let yy = sigma_y_sigma_y();
    let sqrt_rho = rho.hermitian_sqrt();
    let a = sqrt_rho.matmul(&yy).matmul(&sqrt_rho.transpose());
    let lambdas = a.singular_values();
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// Pure-state concurrence `|<psi| sy x sy |psi*>|`; the independent oracle
/// for the Wootters construction.
pub fn concurrence_pure(psi: &[Complex64]) -> Result<f64> {
    if psi.len() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: psi.len() });
    }
    // <psi|sy x sy|psi*> = 2 (c00 c11 - c01 c10) up to sign.
    let yy = sigma_y_sigma_y();
    let conj: Vec<Complex64> = psi.iter().map(|z| z.conj()).collect();
    let v = yy.matvec(&conj);
    let amp: Complex64 = psi.iter().zip(&v).map(|(p, x)| p.conj() * x).sum();
    Ok(amp.norm())
}

/// One row of the conditioned-concurrence table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConcurrencePoint {
    pub tau: f64,
    pub c_even: f64,
    pub c_odd: f64,
    pub n_even: usize,
    pub n_odd: usize,
}

/// Mean conditioned concurrence grouped by the parity decision at each tau.
/// `thresholds` supplies the tau-specific classifier (trained on a labeled
/// ensemble with the same parameters), one per grid point. Records must
/// carry qubit-state checkpoints on a cadence containing the grid.
pub fn concurrence_curve(
    records: &[&TrajectoryRecord],
    tau_grid: &[f64],
    thresholds: &[ClassifierModel],
) -> Result<Vec<ConcurrencePoint>> {
    if thresholds.len() != tau_grid.len() {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "one threshold per tau grid point",
        )));
    }
    let prefixes: Vec<Vec<f64>> = records.iter().map(|r| r.signal_prefix()).collect();
    let mut out = Vec::with_capacity(tau_grid.len());
    for (gi, &tau) in tau_grid.iter().enumerate() {
        let mut acc_even = 0.0;
        let mut acc_odd = 0.0;
        let mut n_even = 0usize;
        let mut n_odd = 0usize;
        for (rec, prefix) in records.iter().zip(&prefixes) {
            let ck = rec
                .checkpoints
                .iter()
                .find(|c| (c.tau - tau).abs() < 1e-9)
                .ok_or(Error::MissingCheckpoints)?;
            let rho = ck.rho_qubits.as_ref().ok_or(Error::MissingCheckpoints)?;
            let c = concurrence(rho)?;
            let s = signal_at(prefix, rec.sample_dt, tau);
            match thresholds[gi].classify(s) {
                Parity::Even => {
                    acc_even += c;
                    n_even += 1;
                }
                Parity::Odd => {
                    acc_odd += c;
                    n_odd += 1;
                }
            }
        }
        out.push(ConcurrencePoint {
            tau,
            c_even: if n_even > 0 { acc_even / n_even as f64 } else { 0.0 },
            c_odd: if n_odd > 0 { acc_odd / n_odd as f64 } else { 0.0 },
            n_even,
            n_odd,
        });
    }
    Ok(out)
}
