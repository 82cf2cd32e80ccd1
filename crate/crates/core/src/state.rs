//! Pure states and density matrices on composite layouts.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::HilbertLayout;
use crate::matrix::CMatrix;
use crate::operators::OperatorMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum StateData {
    Pure(Vec<Complex64>),
    Density(CMatrix),
}

/// A quantum state, either a pure vector or a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    layout: HilbertLayout,
    data: StateData,
}

impl QuantumState {
    pub fn pure(layout: HilbertLayout, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                got: amplitudes.len(),
            });
        }
        Ok(Self { layout, data: StateData::Pure(amplitudes) })
    }

    pub fn density(layout: HilbertLayout, rho: CMatrix) -> Result<Self> {
        if !rho.is_square() || rho.nrows() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                got: rho.nrows(),
            });
        }
        Ok(Self { layout, data: StateData::Density(rho) })
    }

    /// All subsystems in their ground/vacuum level.
    pub fn vacuum(layout: HilbertLayout) -> Self {
        let mut amp = vec![Complex64::new(0.0, 0.0); layout.total_dim()];
        amp[0] = Complex64::new(1.0, 0.0);
        Self { layout, data: StateData::Pure(amp) }
    }

    /// Computational basis state: qubit bits (0/1 per qubit) and Fock levels per mode.
    pub fn basis_state(layout: HilbertLayout, bits: &[u8], fock: &[usize]) -> Result<Self> {
        if bits.len() != layout.qubit_count() || fock.len() != layout.mode_count() {
            return Err(Error::InvalidParameter(String::from(
                "basis_state needs one bit per qubit and one level per mode",
            )));
        }
        let mut digits = Vec::with_capacity(layout.subsystem_count());
        for &b in bits {
            digits.push(b as usize);
        }
        for (m, &n) in fock.iter().enumerate() {
            let dim = layout.subsystem_dim(layout.mode_slot(m)?)?;
            if n >= dim {
                return Err(Error::DimensionMismatch { expected: dim, got: n });
            }
            digits.push(n);
        }
        let idx = layout.index_of(&digits);
        let mut amp = vec![Complex64::new(0.0, 0.0); layout.total_dim()];
        amp[idx] = Complex64::new(1.0, 0.0);
        Ok(Self { layout, data: StateData::Pure(amp) })
    }

    /// Equal superposition of the listed qubit basis states, modes in vacuum.
    pub fn qubit_superposition(layout: HilbertLayout, terms: &[(usize, Complex64)]) -> Result<Self> {
        let nq = layout.qubit_count();
        let qdim = 1usize << nq;
        let mode_dim = layout.total_dim() / qdim;
        let mut amp = vec![Complex64::new(0.0, 0.0); layout.total_dim()];
        for &(qidx, c) in terms {
            if qidx >= qdim {
                return Err(Error::SlotOutOfRange { slot: qidx, count: qdim });
            }
            amp[qidx * mode_dim] += c;
        }
        let mut st = Self { layout, data: StateData::Pure(amp) };
        st.normalize();
        Ok(st)
    }

    /// (|01> + |10>)/sqrt(2) tensored with all-mode vacuum.
    pub fn odd_bell(layout: HilbertLayout) -> Result<Self> {
        let c = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::qubit_superposition(layout, &[(0b01, c), (0b10, c)])
    }

    /// (|00> + |11>)/sqrt(2) tensored with all-mode vacuum.
    pub fn even_bell(layout: HilbertLayout) -> Result<Self> {
        let c = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::qubit_superposition(layout, &[(0b00, c), (0b11, c)])
    }

    /// |++...+> on the qubit register, modes in vacuum.
    pub fn plus_plus_vacuum(layout: HilbertLayout) -> Result<Self> {
        let qdim = 1usize << layout.qubit_count();
        let c = Complex64::new(1.0 / (qdim as f64).sqrt(), 0.0);
        let terms: Vec<(usize, Complex64)> = (0..qdim).map(|q| (q, c)).collect();
        Self::qubit_superposition(layout, &terms)
    }

    /// Truncated coherent state |alpha> on a single-mode layout, built by the
    /// explicit Fock series. The truncation must hold the Poisson tail.
    pub fn coherent(layout: HilbertLayout, alpha: Complex64) -> Result<Self> {
        if layout.qubit_count() != 0 || layout.mode_count() != 1 {
            return Err(Error::InvalidParameter(String::from(
                "coherent() expects a single-mode layout",
            )));
        }
        let dim = layout.fock_dims()[0];
        let mut amp = Vec::with_capacity(dim);
        // c_n = e^{-|a|^2/2} alpha^n / sqrt(n!)
        let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        amp.push(c);
        for n in 1..dim {
            c *= alpha / Complex64::new((n as f64).sqrt(), 0.0);
            amp.push(c);
        }
        let mut st = Self { layout, data: StateData::Pure(amp) };
        st.normalize();
        Ok(st)
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            StateData::Density(_) => None,
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.data {
            StateData::Pure(v) => {
                let d = v.len();
                CMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj())
            }
            StateData::Density(m) => m.clone(),
        }
    }

    pub fn to_density(&self) -> Self {
        Self { layout: self.layout.clone(), data: StateData::Density(self.density_matrix()) }
    }

    /// 2-norm for pure states, trace for density matrices.
    pub fn weight(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            StateData::Density(m) => m.trace().re,
        }
    }

    pub fn normalize(&mut self) {
        match &mut self.data {
            StateData::Pure(v) => {
                let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if n > 0.0 {
                    let inv = Complex64::new(1.0 / n, 0.0);
                    for z in v.iter_mut() {
                        *z *= inv;
                    }
                }
            }
            StateData::Density(m) => {
                let t = m.trace().re;
                if t != 0.0 {
                    m.scale_mut(Complex64::new(1.0 / t, 0.0));
                }
            }
        }
    }

    /// <psi|O|psi> or tr(rho O).
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<Complex64> {
        if *op.layout() != self.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(self.expectation_matrix(op.matrix()))
    }

    /// Expectation against a raw matrix of matching dimension.
    pub fn expectation_matrix(&self, m: &CMatrix) -> Complex64 {
        match &self.data {
            StateData::Pure(v) => {
                let mv = m.matvec(v);
                v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
            }
            StateData::Density(rho) => {
                // tr(rho m) without forming the product.
                let d = rho.nrows();
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..d {
                    for k in 0..d {
                        acc += rho[(i, k)] * m[(k, i)];
                    }
                }
                acc
            }
        }
    }

    /// tr(rho^2); 1 for pure states.
    pub fn purity(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => {
                let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                n * n
            }
            StateData::Density(m) => {
                let d = m.nrows();
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        acc += (m[(i, j)] * m[(j, i)]).re;
                    }
                }
                acc
            }
        }
    }

    /// Reduced density matrix over the kept subsystem slots (ascending order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<QuantumState> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        let nsub = self.layout.subsystem_count();
        let mut keep_sorted: Vec<usize> = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        for &s in &keep_sorted {
            if s >= nsub {
                return Err(Error::SlotOutOfRange { slot: s, count: nsub });
            }
        }
        let traced: Vec<usize> = (0..nsub).filter(|s| !keep_sorted.contains(s)).collect();

        // Layout of the reduced space: kept qubits then kept modes, order preserved.
        let kept_qubits = keep_sorted.iter().filter(|&&s| s < self.layout.qubit_count()).count();
        let kept_fock: Vec<usize> = keep_sorted
            .iter()
            .filter(|&&s| s >= self.layout.qubit_count())
            .map(|&s| self.layout.subsystem_dim(s).unwrap())
            .collect();
        let reduced_layout = HilbertLayout::new(kept_qubits, kept_fock)?;
        let rdim = reduced_layout.total_dim();

        let keep_dims: Vec<usize> =
            keep_sorted.iter().map(|&s| self.layout.subsystem_dim(s).unwrap()).collect();
        let trace_dims: Vec<usize> =
            traced.iter().map(|&s| self.layout.subsystem_dim(s).unwrap()).collect();
        let trace_total: usize = trace_dims.iter().product();

        // Global index from (kept digits, traced digits).
        let compose = |kd: &[usize], td: &[usize]| -> usize {
            let mut digits = vec![0usize; nsub];
            for (pos, &slot) in keep_sorted.iter().enumerate() {
                digits[slot] = kd[pos];
            }
            for (pos, &slot) in traced.iter().enumerate() {
                digits[slot] = td[pos];
            }
            self.layout.index_of(&digits)
        };

        let digits_of = |mut idx: usize, dims: &[usize]| -> Vec<usize> {
            let mut out = vec![0usize; dims.len()];
            for k in (0..dims.len()).rev() {
                out[k] = idx % dims[k];
                idx /= dims[k];
            }
            out
        };

        let mut out = CMatrix::zeros(rdim, rdim);
        match &self.data {
            StateData::Pure(v) => {
                for ri in 0..rdim {
                    let kdi = digits_of(ri, &keep_dims);
                    for rj in 0..rdim {
                        let kdj = digits_of(rj, &keep_dims);
                        let mut acc = Complex64::new(0.0, 0.0);
                        for t in 0..trace_total {
                            let td = digits_of(t, &trace_dims);
                            acc += v[compose(&kdi, &td)] * v[compose(&kdj, &td)].conj();
                        }
                        out[(ri, rj)] = acc;
                    }
                }
            }
            StateData::Density(rho) => {
                for ri in 0..rdim {
                    let kdi = digits_of(ri, &keep_dims);
                    for rj in 0..rdim {
                        let kdj = digits_of(rj, &keep_dims);
                        let mut acc = Complex64::new(0.0, 0.0);
                        for t in 0..trace_total {
                            let td = digits_of(t, &trace_dims);
                            acc += rho[(compose(&kdi, &td), compose(&kdj, &td))];
                        }
                        out[(ri, rj)] = acc;
                    }
                }
            }
        }
        QuantumState::density(reduced_layout, out)
    }

    /// Reduced density matrix of the qubit register (modes traced out).
    pub fn qubit_density(&self) -> Result<CMatrix> {
        let keep: Vec<usize> = (0..self.layout.qubit_count()).collect();
        Ok(self.partial_trace(&keep)?.density_matrix())
    }

    /// Per-level populations of a bosonic mode.
    pub fn mode_populations(&self, mode: usize) -> Result<Vec<f64>> {
        let slot = self.layout.mode_slot(mode)?;
        let dim = self.layout.subsystem_dim(slot)?;
        let mut pops = vec![0.0f64; dim];
        match &self.data {
            StateData::Pure(v) => {
                for (idx, z) in v.iter().enumerate() {
                    pops[self.layout.digits(idx)[slot]] += z.norm_sqr();
                }
            }
            StateData::Density(m) => {
                for idx in 0..m.nrows() {
                    pops[self.layout.digits(idx)[slot]] += m[(idx, idx)].re;
                }
            }
        }
        Ok(pops)
    }

    /// Total population in the top two levels across all modes.
    pub fn truncation_tail(&self) -> f64 {
        let diag = crate::operators::tail_projector_diag(&self.layout);
        match &self.data {
            StateData::Pure(v) => v.iter().zip(&diag).map(|(z, d)| d * z.norm_sqr()).sum(),
            StateData::Density(m) => {
                (0..m.nrows()).map(|i| diag[i] * m[(i, i)].re).sum()
            }
        }
    }

    /// Validate density-matrix invariants: unit trace, hermiticity, PSD
    /// within the given eigenvalue tolerance.
    pub fn check_density_validity(&self, eig_tol: f64) -> Result<()> {
        let rho = match &self.data {
            StateData::Density(m) => m,
            StateData::Pure(_) => return Ok(()),
        };
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-9 {
            return Err(Error::InvalidDensity(alloc::format!("trace = {}", tr.re)));
        }
        if !rho.is_hermitian(1e-8) {
            return Err(Error::InvalidDensity(String::from("not Hermitian")));
        }
        let (vals, _) = rho.hermitian_eigen();
        if let Some(&min) = vals.first() {
            if min < -eig_tol {
                return Err(Error::InvalidDensity(alloc::format!("eigenvalue {min}")));
            }
        }
        Ok(())
    }
}
