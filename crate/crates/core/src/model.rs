//! Physical model construction: Hamiltonians and collapse operators in the
//! rotating frame, from a single parameter record.
//!
//! Every rate is in units of kappa (the nonlinear resonator's single-photon
//! loss), every time in 1/kappa. Absolute frequencies never appear: the
//! two-qubit model lives in the frame rotating at the resonator frequency,
//! and each four-qubit parity block lives in the frame of its resonant drive
//! tone (see [`build_four_qubit_effective`] for the term lists).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::HilbertLayout;
use crate::matrix::CMatrix;
use crate::operators::{destroy_on, embed, fock_destroy, number_on, sigma_z_on, OperatorMatrix};

/// All physical parameters of a simulation, in units of kappa.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    /// Single-photon loss rate of the nonlinear resonator (the unit; 1.0).
    pub kappa: f64,
    /// Internal (undetected) photon loss of the nonlinear resonator.
    pub kappa_int: f64,
    /// Kerr nonlinearity K.
    pub kerr: f64,
    /// Dispersive shift chi per qubit.
    pub chi: f64,
    /// Two-photon drive amplitude.
    pub eps_p: f64,
    /// Two-photon drive detuning delta (two-qubit/bare model only).
    pub delta: f64,
    /// Resonator-filter coupling modulation amplitude g (four-qubit model).
    pub g: f64,
    /// Resonator-filter frequency difference; frame bookkeeping only, never
    /// enters a rotating-frame matrix element.
    pub delta_f: f64,
    /// Filter decay rate.
    pub kappa_f: f64,
    /// Relative phase between the two tones of the two-photon drive and of
    /// the coupling modulation. Zero by default.
    pub tone_phase: f64,
    /// Fock truncation of the nonlinear resonator.
    pub fock_dim_resonator: usize,
    /// Fock truncation of the filter mode, when a filter is present.
    pub fock_dim_filter: Option<usize>,
    /// Number of dispersively coupled qubits: 0, 2 or 4.
    pub qubit_count: usize,
}

impl ModelSpec {
    /// Bare driven Kerr resonator, no qubits.
    pub fn bare_resonator(eps_p: f64, kerr: f64, fock_dim: usize) -> Self {
        Self {
            kappa: 1.0,
            kappa_int: 0.0,
            kerr,
            chi: 0.0,
            eps_p,
            delta: 0.0,
            g: 0.0,
            delta_f: 0.0,
            kappa_f: 0.0,
            tone_phase: 0.0,
            fock_dim_resonator: fock_dim,
            fock_dim_filter: None,
            qubit_count: 0,
        }
    }

    /// Two-qubit parity readout with the main-text parameter set
    /// (K = 0.175 kappa, chi = 25 kappa, eps_p = 2.5 kappa).
    pub fn text_params() -> Self {
        Self {
            kappa: 1.0,
            kappa_int: 0.0,
            kerr: 0.175,
            chi: 25.0,
            eps_p: 2.5,
            delta: 0.0,
            g: 0.0,
            delta_f: 0.0,
            kappa_f: 0.0,
            tone_phase: 0.0,
            fock_dim_resonator: 60,
            fock_dim_filter: None,
            qubit_count: 2,
        }
    }

    /// Two-qubit parity readout with the figure parameter set
    /// (K = 0.17 kappa; the two published parameter sets differ in K).
    pub fn figure_params() -> Self {
        Self { kerr: 0.17, ..Self::text_params() }
    }

    /// Look up a named preset.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "text-params" => Some(Self::text_params()),
            "figure-params" => Some(Self::figure_params()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidParameter(String::from("kappa must be positive")));
        }
        for (name, v) in [
            ("kappa_int", self.kappa_int),
            ("kerr", self.kerr),
            ("chi", self.chi),
            ("eps_p", self.eps_p),
            ("delta", self.delta),
            ("g", self.g),
            ("delta_f", self.delta_f),
            ("kappa_f", self.kappa_f),
            ("tone_phase", self.tone_phase),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if self.kappa_int < 0.0 || self.kappa_f < 0.0 {
            return Err(Error::InvalidParameter(String::from("decay rates must be >= 0")));
        }
        if self.fock_dim_resonator < 8 {
            return Err(Error::InvalidParameter(String::from("fock_dim_resonator must be >= 8")));
        }
        if let Some(nf) = self.fock_dim_filter {
            if nf < 2 {
                return Err(Error::InvalidDimension { dim: nf });
            }
        }
        if !matches!(self.qubit_count, 0 | 2 | 4) {
            return Err(Error::InvalidParameter(String::from("qubit_count must be 0, 2 or 4")));
        }
        Ok(())
    }

    /// Layout of the simulated composite space. Four-qubit specs simulate
    /// per-parity-block two-mode spaces; the qubit register is never
    /// materialized there (the Hamiltonian commutes with every sigma_z).
    pub fn layout(&self) -> Result<HilbertLayout> {
        self.validate()?;
        match self.qubit_count {
            0 => HilbertLayout::new(0, [self.fock_dim_resonator]),
            2 => HilbertLayout::new(2, [self.fock_dim_resonator]),
            4 => {
                let nf = self.fock_dim_filter.ok_or_else(|| {
                    Error::InvalidParameter(String::from(
                        "four-qubit model needs fock_dim_filter",
                    ))
                })?;
                HilbertLayout::new(0, [self.fock_dim_resonator, nf])
            }
            _ => unreachable!(),
        }
    }

    /// Pointer phase Arg<a> of the latched high-amplitude branch in this
    /// crate's frame convention. The closed-form steady-state angle of
    /// [`crate::analytics::steady_state`] refers to the conjugate quadrature
    /// convention, so the simulated pointer sits at its negative.
    pub fn pointer_phase(&self) -> f64 {
        -crate::analytics::steady_state_angle(self.eps_p, self.kappa)
    }
}

/// One collapse channel: rate and lifted operator.
#[derive(Debug, Clone)]
pub struct CollapseChannel {
    pub rate: f64,
    pub op: OperatorMatrix,
    pub label: &'static str,
}

/// A drive term `amplitude * e^{i(freq t + phase)} * op + h.c.`
#[derive(Debug, Clone)]
pub struct DriveTerm {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub op: OperatorMatrix,
}

impl DriveTerm {
    pub fn coefficient(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.frequency * t + self.phase)
    }
}

/// Hamiltonian with a static part and harmonically modulated drive terms:
/// `H(t) = static + sum_k c_k(t) O_k + h.c.`
#[derive(Debug, Clone)]
pub struct TimeDependentHamiltonian {
    pub static_part: OperatorMatrix,
    pub drives: Vec<DriveTerm>,
}

impl TimeDependentHamiltonian {
    pub fn time_independent(static_part: OperatorMatrix) -> Self {
        Self { static_part, drives: Vec::new() }
    }

    pub fn layout(&self) -> &HilbertLayout {
        self.static_part.layout()
    }

    /// Assemble the dense Hamiltonian at time t (including all h.c. parts).
    pub fn at(&self, t: f64) -> CMatrix {
        let mut h = self.static_part.matrix().clone();
        for d in &self.drives {
            let c = d.coefficient(t);
            let m = d.op.matrix();
            h.axpy(c, m);
            h.axpy(Complex64::new(1.0, 0.0), &m.adjoint().scale(c.conj()));
        }
        h
    }

    pub fn is_static(&self) -> bool {
        self.drives.is_empty()
    }
}

/// `H = delta a+a + (eps_p/2)(aa + a+a+) - (K/2) a+a+aa` on the bare
/// resonator space.
pub fn build_kerr_resonator(spec: &ModelSpec) -> Result<OperatorMatrix> {
    spec.validate()?;
    if spec.qubit_count != 0 {
        return Err(Error::WrongBuilder { expected: 0, got: spec.qubit_count });
    }
    let layout = spec.layout()?;
    Ok(OperatorMatrix::new(layout.clone(), kerr_matrix(spec.fock_dim_resonator, spec.delta, spec.eps_p, spec.kerr)?)?)
}

/// The resonator-space matrix of `delta n + (eps/2)(aa + a+a+) - (K/2)a+a+aa`.
pub fn kerr_matrix(dim: usize, delta: f64, eps_p: f64, kerr: f64) -> Result<CMatrix> {
    let a = fock_destroy(dim)?;
    let ad = a.adjoint();
    let aa = a.matmul(&a);
    let mut h = CMatrix::zeros(dim, dim);
    // delta a+a and -(K/2) a+a+aa are diagonal: n delta - (K/2) n(n-1).
    for n in 0..dim {
        let nn = n as f64;
        h[(n, n)] = Complex64::new(delta * nn - 0.5 * kerr * nn * (nn - 1.0), 0.0);
    }
    h.axpy(Complex64::new(0.5 * eps_p, 0.0), &aa);
    h.axpy(Complex64::new(0.5 * eps_p, 0.0), &ad.matmul(&ad));
    Ok(h)
}

/// Two-qubit dispersive model `H = chi (sz1 + sz2) a+a + H_R` on the
/// 4N-dimensional composite space.
pub fn build_two_qubit_model(spec: &ModelSpec) -> Result<OperatorMatrix> {
    spec.validate()?;
    if spec.qubit_count != 2 {
        return Err(Error::WrongBuilder { expected: 2, got: spec.qubit_count });
    }
    if spec.chi == 0.0 {
        return Err(Error::InvalidParameter(String::from(
            "two-qubit model needs a nonzero dispersive shift chi",
        )));
    }
    let layout = spec.layout()?;
    let n_op = number_on(&layout, 0)?;
    let z1 = sigma_z_on(&layout, 0)?;
    let z2 = sigma_z_on(&layout, 1)?;
    let zsum = z1.add(&z2)?;
    let mut h = zsum.matmul(&n_op)?.scale(Complex64::new(spec.chi, 0.0));
    let hr = kerr_matrix(spec.fock_dim_resonator, spec.delta, spec.eps_p, spec.kerr)?;
    let hr_lifted = embed_mode_matrix(&layout, &hr)?;
    h = h.add(&hr_lifted)?;
    Ok(h)
}

/// Lift a resonator-space matrix to the composite space (identity on qubits).
fn embed_mode_matrix(layout: &HilbertLayout, m: &CMatrix) -> Result<OperatorMatrix> {
    embed(m, layout.mode_slot(0)?, layout)
}

/// Dispersive shift of a four-qubit parity block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DispersiveShift {
    Minus4Chi,
    Minus2Chi,
    Zero,
    Plus2Chi,
    Plus4Chi,
}

/// Joint qubit parity of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Parity {
    Even,
    Odd,
}

impl DispersiveShift {
    pub fn all() -> [DispersiveShift; 5] {
        [
            DispersiveShift::Minus4Chi,
            DispersiveShift::Minus2Chi,
            DispersiveShift::Zero,
            DispersiveShift::Plus2Chi,
            DispersiveShift::Plus4Chi,
        ]
    }

    /// Shift in units of chi: -4, -2, 0, +2, +4.
    pub fn in_chi(&self) -> f64 {
        match self {
            DispersiveShift::Minus4Chi => -4.0,
            DispersiveShift::Minus2Chi => -2.0,
            DispersiveShift::Zero => 0.0,
            DispersiveShift::Plus2Chi => 2.0,
            DispersiveShift::Plus4Chi => 4.0,
        }
    }

    pub fn value(&self, chi: f64) -> f64 {
        self.in_chi() * chi
    }

    /// Parity of the qubit subspace carrying this shift. Four qubits with
    /// m excitations shift the resonator by (4 - 2m) chi, so even m gives
    /// {0, +-4 chi} and odd m gives {+-2 chi}.
    pub fn parity(&self) -> Parity {
        match self {
            DispersiveShift::Minus2Chi | DispersiveShift::Plus2Chi => Parity::Odd,
            _ => Parity::Even,
        }
    }

    /// Number of four-qubit basis states carrying this shift (binomial
    /// structure 1, 4, 6, 4, 1 over m = 0..4 excitations).
    pub fn degeneracy(&self) -> usize {
        match self {
            DispersiveShift::Plus4Chi | DispersiveShift::Minus4Chi => 1,
            DispersiveShift::Plus2Chi | DispersiveShift::Minus2Chi => 4,
            DispersiveShift::Zero => 6,
        }
    }

    /// Sign selecting the resonant/nearest drive tone: the block's rotating
    /// frame sits at the resonator frequency plus `sign * 2 chi`. The
    /// zero-shift block is assigned the lower tone (sign = -1) by convention.
    pub fn frame_sign(&self) -> f64 {
        match self {
            DispersiveShift::Plus2Chi | DispersiveShift::Plus4Chi => 1.0,
            _ => -1.0,
        }
    }
}

/// Effective rotating-frame Hamiltonian of one four-qubit parity block on the
/// two-mode (resonator x filter) space.
///
/// The lab-frame model carries a two-tone two-photon drive at twice
/// (resonator frequency +- 2 chi) and a two-tone coupling modulation at
/// (Delta_f +- 2 chi). Rotating the resonator at its nearest drive tone
/// (frame offset `s * 2 chi` with `s = frame_sign`) and the filter at its own
/// frequency, then dropping terms oscillating at absolute frequencies, leaves
/// per block:
///
/// * static: `(delta_b - s 2chi) a+a + (eps_p/2)(aa + a+a+) - (K/2)a+a+aa
///   + (g/2)(a f+ + a+ f)`
/// * sidebands (the other tone of each modulation):
///   `(eps_p/2) e^{i s 8chi t} a+a+ + h.c.` and
///   `(g/2) e^{i s 4chi t} a+ f + h.c.`
///
/// Odd blocks (`delta_b = +-2chi`) have zero static detuning; even blocks
/// keep a residual `+-2chi a+a`, i.e. they see the nearest tone as a detuned
/// two-photon drive.
pub fn build_four_qubit_effective(
    spec: &ModelSpec,
    shift: DispersiveShift,
    include_sidebands: bool,
) -> Result<TimeDependentHamiltonian> {
    spec.validate()?;
    if spec.qubit_count != 4 {
        return Err(Error::WrongBuilder { expected: 4, got: spec.qubit_count });
    }
    let layout = spec.layout()?; // errors if fock_dim_filter is absent
    let s = shift.frame_sign();
    let detuning = shift.value(spec.chi) - s * 2.0 * spec.chi;

    let a = destroy_on(&layout, 0)?;
    let f = destroy_on(&layout, 1)?;
    let n_a = number_on(&layout, 0)?;

    // Static part.
    let mut h = n_a.scale(Complex64::new(detuning, 0.0));
    let aa = a.matmul(&a)?;
    let half_eps = Complex64::new(0.5 * spec.eps_p, 0.0);
    h = h.add(&aa.add(&aa.adjoint())?.scale(half_eps))?;
    // Kerr: -(K/2) a+a+aa, diagonal in the resonator digits.
    let kerr_term = aa.adjoint().matmul(&aa)?.scale(Complex64::new(-0.5 * spec.kerr, 0.0));
    h = h.add(&kerr_term)?;
    let coupling = a.matmul(&f.adjoint())?.add(&a.adjoint().matmul(&f)?)?;
    h = h.add(&coupling.scale(Complex64::new(0.5 * spec.g, 0.0)))?;

    let mut drives = Vec::new();
    if include_sidebands {
        // Off-resonant two-photon tone: (eps_p/2) e^{i s 8chi t} a+a+ + h.c.
        drives.push(DriveTerm {
            amplitude: 0.5 * spec.eps_p,
            frequency: s * 8.0 * spec.chi,
            phase: spec.tone_phase,
            op: aa.adjoint(),
        });
        // Off-resonant coupling tone: (g/2) e^{i s 4chi t} a+ f + h.c.
        drives.push(DriveTerm {
            amplitude: 0.5 * spec.g,
            frequency: s * 4.0 * spec.chi,
            phase: spec.tone_phase,
            op: a.adjoint().matmul(&f)?,
        });
    }
    Ok(TimeDependentHamiltonian { static_part: h, drives })
}

/// Collapse channels of the configured model: `[(kappa, a)]` for the bare and
/// two-qubit models (plus the internal-loss channel when present), and
/// `[(kappa_int, a), (kappa_f, f)]` for the filtered four-qubit model.
pub fn build_collapse_ops(spec: &ModelSpec) -> Result<Vec<CollapseChannel>> {
    spec.validate()?;
    let layout = spec.layout()?;
    let mut out = Vec::new();
    match spec.qubit_count {
        0 | 2 => {
            out.push(CollapseChannel {
                rate: spec.kappa,
                op: destroy_on(&layout, 0)?,
                label: "resonator-output",
            });
            if spec.kappa_int > 0.0 {
                out.push(CollapseChannel {
                    rate: spec.kappa_int,
                    op: destroy_on(&layout, 0)?,
                    label: "resonator-internal",
                });
            }
        }
        4 => {
            if spec.kappa_int > 0.0 {
                out.push(CollapseChannel {
                    rate: spec.kappa_int,
                    op: destroy_on(&layout, 0)?,
                    label: "resonator-internal",
                });
            }
            if spec.kappa_f <= 0.0 {
                return Err(Error::InvalidParameter(String::from(
                    "four-qubit model needs kappa_f > 0",
                )));
            }
            out.push(CollapseChannel {
                rate: spec.kappa_f,
                op: destroy_on(&layout, 1)?,
                label: "filter-output",
            });
        }
        _ => unreachable!(),
    }
    Ok(out)
}
