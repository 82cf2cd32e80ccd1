//! Four-qubit parity measurement through a frequency-erasing filter:
//! per-block two-mode simulations across the dispersive shifts
//! {0, +-2chi, +-4chi}, sideband-induced dephasing estimates, and the
//! adiabatic-filter check.

use alloc::vec::Vec;
use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::analytics::{dephasing_rates, fit_exponential_decay};
use crate::coherence::{dephasing_rate_numeric, CoherenceOptions, DephasingEstimate};
use crate::error::{Error, Result};
use crate::hilbert::HilbertLayout;
use crate::integrate::LindbladPropagator;
use crate::matrix::CMatrix;
use crate::model::{
    build_collapse_ops, build_four_qubit_effective, CollapseChannel, DispersiveShift, ModelSpec,
    Parity, TimeDependentHamiltonian,
};
use crate::operators::tail_projector_diag;
use crate::sparse::CsrMatrix;
use crate::state::QuantumState;
use crate::trajectory::TAIL_THRESHOLD;

/// One dispersive-shift block of the four-qubit measurement.
#[derive(Debug, Clone)]
pub struct ParityBlock {
    pub shift: DispersiveShift,
    pub degeneracy: usize,
    pub parity: Parity,
    pub hamiltonian: TimeDependentHamiltonian,
}

/// All five blocks plus the shared collapse channels.
#[derive(Debug, Clone)]
pub struct ParityBlockSet {
    pub blocks: Vec<ParityBlock>,
    pub channels: Vec<CollapseChannel>,
}

impl ParityBlockSet {
    pub fn odd_blocks(&self) -> impl Iterator<Item = &ParityBlock> {
        self.blocks.iter().filter(|b| b.parity == Parity::Odd)
    }

    pub fn even_blocks(&self) -> impl Iterator<Item = &ParityBlock> {
        self.blocks.iter().filter(|b| b.parity == Parity::Even)
    }
}

/// Build the effective rotating-frame model of every dispersive-shift block.
pub fn build_parity_blocks(spec: &ModelSpec, include_sidebands: bool) -> Result<ParityBlockSet> {
    if spec.qubit_count != 4 {
        return Err(Error::WrongBuilder { expected: 4, got: spec.qubit_count });
    }
    let channels = build_collapse_ops(spec)?;
    let mut blocks = Vec::with_capacity(5);
    for shift in DispersiveShift::all() {
        blocks.push(ParityBlock {
            shift,
            degeneracy: shift.degeneracy(),
            parity: shift.parity(),
            hamiltonian: build_four_qubit_effective(spec, shift, include_sidebands)?,
        });
    }
    debug_assert_eq!(blocks.iter().map(|b| b.degeneracy).sum::<usize>(), 16);
    Ok(ParityBlockSet { blocks, channels })
}

/// Time series of one block's deterministic (Lindblad) evolution.
#[derive(Debug, Clone)]
pub struct BlockTrace {
    pub times: Vec<f64>,
    pub exp_a: Vec<Complex64>,
    pub exp_f: Vec<Complex64>,
    pub exp_na: Vec<f64>,
    pub exp_nf: Vec<f64>,
    /// Emitted-field amplitude sqrt(kappa_f) |<f>|.
    pub output_amplitude: Vec<f64>,
    pub max_tail: f64,
}

fn trace_product(csr: &CsrMatrix, rho: &CMatrix) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, j, v) in csr.entries() {
        acc += v * rho[(j, i)];
    }
    acc
}

/// Product state `|alpha_seed> (x) |0>` on the two-mode block layout.
fn seeded_state(layout: &HilbertLayout, seed_amp: Complex64) -> Result<QuantumState> {
    let na = layout.fock_dims()[0];
    let nf = layout.fock_dims()[1];
    let res = QuantumState::coherent(HilbertLayout::mode(na)?, seed_amp)?;
    let res_amp = res.amplitudes().unwrap();
    let mut amps = alloc::vec![Complex64::new(0.0, 0.0); layout.total_dim()];
    for (ia, &va) in res_amp.iter().enumerate() {
        amps[ia * nf] = va;
    }
    QuantumState::pure(layout.clone(), amps)
}

/// Deterministic Lindblad run of one block from a seeded resonator coherent
/// state (the seed breaks the a -> -a symmetry so the run latches onto one
/// branch instead of the symmetric mixture). Fails if the truncation tail
/// ever exceeds the monitor threshold.
pub fn block_lindblad_trace(
    spec: &ModelSpec,
    shift: DispersiveShift,
    include_sidebands: bool,
    seed_amp: Complex64,
    horizon: f64,
    dt: f64,
    sample_every: usize,
) -> Result<BlockTrace> {
    let h = build_four_qubit_effective(spec, shift, include_sidebands)?;
    let channels = build_collapse_ops(spec)?;
    let layout = h.layout().clone();
    let prop = LindbladPropagator::new(&h, &channels);

    let a_csr = CsrMatrix::from_dense(crate::operators::destroy_on(&layout, 0)?.matrix(), 0.0);
    let f_csr = CsrMatrix::from_dense(crate::operators::destroy_on(&layout, 1)?.matrix(), 0.0);
    let na_diag: Vec<f64> = {
        let slot = layout.mode_slot(0)?;
        (0..layout.total_dim()).map(|i| layout.digits(i)[slot] as f64).collect()
    };
    let nf_diag: Vec<f64> = {
        let slot = layout.mode_slot(1)?;
        (0..layout.total_dim()).map(|i| layout.digits(i)[slot] as f64).collect()
    };
    let tail_diag = tail_projector_diag(&layout);
    let sqrt_kf = spec.kappa_f.sqrt();

    let mut rho = seeded_state(&layout, seed_amp)?.density_matrix();
    let steps = (horizon / dt).round() as usize;
    let mut trace = BlockTrace {
        times: Vec::new(),
        exp_a: Vec::new(),
        exp_f: Vec::new(),
        exp_na: Vec::new(),
        exp_nf: Vec::new(),
        output_amplitude: Vec::new(),
        max_tail: 0.0,
    };
    prop.evolve_rk4(&mut rho, 0.0, dt, steps, |s, t, rho| {
        if s % sample_every != 0 && s != steps {
            return;
        }
        let ea = trace_product(&a_csr, rho);
        let ef = trace_product(&f_csr, rho);
        let na: f64 = (0..rho.nrows()).map(|i| na_diag[i] * rho[(i, i)].re).sum();
        let nf: f64 = (0..rho.nrows()).map(|i| nf_diag[i] * rho[(i, i)].re).sum();
        let tail: f64 = (0..rho.nrows()).map(|i| tail_diag[i] * rho[(i, i)].re).sum();
        trace.times.push(t);
        trace.exp_a.push(ea);
        trace.exp_f.push(ef);
        trace.exp_na.push(na);
        trace.exp_nf.push(nf);
        trace.output_amplitude.push(sqrt_kf * ef.norm());
        if tail > trace.max_tail {
            trace.max_tail = tail;
        }
    });
    if trace.max_tail > TAIL_THRESHOLD {
        return Err(Error::TruncationTail { population: trace.max_tail, threshold: TAIL_THRESHOLD });
    }
    Ok(trace)
}

/// Bifurcation run of one odd block (shift must be +-2chi).
pub fn odd_block_bifurcation(
    spec: &ModelSpec,
    shift: DispersiveShift,
    include_sidebands: bool,
    horizon: f64,
    dt: f64,
) -> Result<BlockTrace> {
    if shift.parity() != Parity::Odd {
        return Err(Error::InvalidShift);
    }
    block_lindblad_trace(spec, shift, include_sidebands, Complex64::new(0.5, 0.0), horizon, dt, 32)
}

/// Numeric sideband dephasing between the two odd blocks, with the closed
/// form it is compared against.
#[derive(Debug, Clone)]
pub struct SidebandDephasing {
    pub estimate: DephasingEstimate,
    /// kappa_eff |alpha_o|^2 / (1 + (8 chi / kappa_f)^2).
    pub closed_form: f64,
    pub photon_number: f64,
    pub kappa_eff: f64,
}

/// Evolve the odd-block coherence operator from two-mode vacuum and fit the
/// decay of |tr C|; the sidebands are the only difference between the two
/// block generators, so with them off the rate is exactly zero.
pub fn sideband_dephasing_estimate(
    spec: &ModelSpec,
    include_sidebands: bool,
    opts: Option<CoherenceOptions>,
) -> Result<SidebandDephasing> {
    let h_left = build_four_qubit_effective(spec, DispersiveShift::Plus2Chi, include_sidebands)?;
    let h_right = build_four_qubit_effective(spec, DispersiveShift::Minus2Chi, include_sidebands)?;
    let channels = build_collapse_ops(spec)?;
    let rates = dephasing_rates(spec)?;
    let opts = opts.unwrap_or_else(|| {
        let max_freq = 8.0 * spec.chi.abs();
        let timescale = 1.0 / (spec.eps_p - 0.5 * rates.kappa_eff).max(0.1);
        let transient = (6.0 * timescale).max(4.0 / spec.kappa_f.max(0.1));
        // Window long enough for a clean fit: ~30% decay when the rate is
        // fast, capped for the strongly suppressed points where the
        // deterministic trace still fits far smaller drops.
        let gamma = rates.gamma_o_eff.max(1e-12);
        let window = (0.3 / gamma).clamp(10.0, 80.0);
        CoherenceOptions::auto(max_freq, transient + window, transient)
    });
    let vac = QuantumState::vacuum(h_left.layout().clone());
    let estimate = dephasing_rate_numeric(&h_left, &h_right, &channels, &vac, &opts)?;
    Ok(SidebandDephasing {
        estimate,
        closed_form: rates.gamma_o_eff,
        photon_number: rates.gamma_o_naive / spec.kappa,
        kappa_eff: rates.kappa_eff,
    })
}

/// One point of the Lorentzian-suppression sweep.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub chi_over_kappa_f: f64,
    pub rate_numeric: f64,
    pub rate_closed_form: f64,
}

/// Sweep chi at fixed g, kappa_f, eps_p, K: the steady photon number is
/// chi-independent, so the numeric rates should trace the pure Lorentzian
/// `1/(1 + (8 chi/kappa_f)^2)`.
pub fn sideband_rate_sweep(
    base: &ModelSpec,
    chi_over_kappa_f: &[f64],
    opts_for: impl Fn(&ModelSpec) -> Option<CoherenceOptions>,
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::with_capacity(chi_over_kappa_f.len());
    for &ratio in chi_over_kappa_f {
        let mut spec = base.clone();
        spec.chi = ratio * spec.kappa_f;
        let res = sideband_dephasing_estimate(&spec, true, opts_for(&spec))?;
        out.push(SweepPoint {
            chi_over_kappa_f: ratio,
            rate_numeric: res.estimate.rate,
            rate_closed_form: res.closed_form,
        });
    }
    Ok(out)
}

/// Fitted decay rate of |<a>| through the filter for the linearized model
/// (two-photon drive and Kerr off): for kappa_f >> g the energy decay
/// approaches kappa_eff = g^2/kappa_f. Returns the fitted energy rate
/// (2x the amplitude rate).
pub fn filter_effective_decay(spec: &ModelSpec, horizon: f64, dt: f64) -> Result<f64> {
    let mut linear = spec.clone();
    linear.eps_p = 0.0;
    linear.kerr = 0.0;
    let trace = block_lindblad_trace(
        &linear,
        DispersiveShift::Minus2Chi,
        false,
        Complex64::new(1.0, 0.0),
        horizon,
        dt,
        16,
    )?;
    let amp: Vec<f64> = trace.exp_a.iter().map(|a| a.norm()).collect();
    // Skip the first filter transient ~ 2/kappa_f.
    let t0 = 2.0 / spec.kappa_f.max(1e-6);
    let fit = fit_exponential_decay(&trace.times, &amp, t0, horizon)?;
    Ok(2.0 * fit.rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_spec() -> ModelSpec {
        // kappa_eff = g^2/kappa_f = 0.5; |alpha_o|^2 = 2.25, which keeps the
        // Poisson tail at N_a = 16 under the 1e-6 monitor with margin.
        let g = 2.0;
        let kappa_f = 8.0;
        let eps = 1.0;
        let keff: f64 = g * g / kappa_f;
        let kerr = (eps * eps - 0.25 * keff * keff).sqrt() / 2.25;
        ModelSpec {
            kappa: 1.0,
            kappa_int: 0.0,
            kerr,
            chi: 8.0,
            eps_p: eps,
            delta: 0.0,
            g,
            delta_f: 0.0,
            kappa_f,
            tone_phase: 0.0,
            fock_dim_resonator: 16,
            fock_dim_filter: Some(6),
            qubit_count: 4,
        }
    }

    #[test]
    fn block_set_structure() {
        let set = build_parity_blocks(&small_spec(), false).unwrap();
        assert_eq!(set.blocks.len(), 5);
        let total: usize = set.blocks.iter().map(|b| b.degeneracy).sum();
        assert_eq!(total, 16);
        let odd: Vec<_> = set.odd_blocks().collect();
        assert_eq!(odd.len(), 2);
        assert!(odd.iter().all(|b| b.degeneracy == 4));
        let even: Vec<_> = set.even_blocks().collect();
        assert_eq!(even.len(), 3);
        assert_eq!(even.iter().map(|b| b.degeneracy).sum::<usize>(), 8);
        assert_eq!(set.channels.len(), 1);
    }

    #[test]
    fn decoupled_filter_stays_empty() {
        // g = 0: <f> = 0 while the resonator bifurcates to the closed-form
        // amplitude (the resonator loses photons only through kappa_int here,
        // so give it a small internal loss to have any decay at all).
        let mut spec = small_spec();
        spec.g = 0.0;
        spec.kappa_int = 0.5;
        spec.kerr = (spec.eps_p * spec.eps_p - 0.25 * 0.25f64).sqrt() / 2.25;
        let trace = odd_block_bifurcation(&spec, DispersiveShift::Minus2Chi, false, 14.0, 1e-3)
            .unwrap();
        let nf_max = trace.exp_nf.iter().cloned().fold(0.0f64, f64::max);
        assert!(nf_max < 1e-9, "filter occupation {nf_max}");
        let na_end = *trace.exp_na.last().unwrap();
        assert_relative_eq!(na_end, 2.25, epsilon = 0.45);
    }

    #[test]
    fn odd_blocks_mirror_without_sidebands() {
        // Identical output-amplitude series to 1e-9: the static odd blocks
        // carry no which-shift information.
        let mut spec = small_spec();
        spec.fock_dim_filter = Some(8); // steady filter amplitude needs headroom
        let tm = odd_block_bifurcation(&spec, DispersiveShift::Minus2Chi, false, 10.0, 1e-3)
            .unwrap();
        let tp = odd_block_bifurcation(&spec, DispersiveShift::Plus2Chi, false, 10.0, 1e-3)
            .unwrap();
        let worst = tm
            .output_amplitude
            .iter()
            .zip(&tp.output_amplitude)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "odd blocks differ by {worst}");
        // And the resonator reaches the steady amplitude through the filter.
        let na_end = *tm.exp_na.last().unwrap();
        assert_relative_eq!(na_end, 2.25, epsilon = 0.45);
        assert!(*tm.exp_nf.last().unwrap() > 1e-3);
    }

    #[test]
    fn even_blocks_stay_near_vacuum() {
        // Detuned drive keeps <a+a> < 0.2 for |2 chi| >> eps_p.
        let mut spec = small_spec();
        spec.chi = 20.0 * spec.kappa_f; // chi/kappa_f = 20
        for shift in [DispersiveShift::Zero, DispersiveShift::Plus4Chi, DispersiveShift::Minus4Chi]
        {
            let trace = block_lindblad_trace(
                &spec,
                shift,
                false,
                Complex64::new(0.0, 0.0),
                4.0,
                2.5e-4,
                64,
            )
            .unwrap();
            let na_max = trace.exp_na.iter().cloned().fold(0.0f64, f64::max);
            assert!(na_max < 0.2, "{shift:?}: <n_a> reached {na_max}");
        }
    }

    #[test]
    fn adiabatic_filter_limit() {
        // kappa_f/g = 20: fitted effective decay within 10% of g^2/kappa_f.
        let mut spec = small_spec();
        spec.g = 0.4;
        spec.kappa_f = 8.0;
        spec.fock_dim_resonator = 12; // seeded |alpha| = 1 needs the headroom
        spec.fock_dim_filter = Some(5);
        let keff = spec.g * spec.g / spec.kappa_f; // 0.02
        let rate = filter_effective_decay(&spec, 60.0, 1e-3).unwrap();
        assert_relative_eq!(rate, keff, epsilon = 0.1 * keff);
    }

    #[test]
    fn sidebands_off_zero_dephasing() {
        let spec = small_spec();
        let opts = CoherenceOptions { dt: 1e-3, horizon: 12.0, fit_start: 6.0, sample_every: 64 };
        let res = sideband_dephasing_estimate(&spec, false, Some(opts)).unwrap();
        assert!(res.estimate.rate.abs() < 1e-9, "rate {}", res.estimate.rate);
    }

    #[test]
    fn sideband_dephasing_matches_lorentzian_form() {
        // Medium point of the Lorentzian: numeric within 25% of closed form.
        let spec = small_spec(); // chi/kappa_f = 1, x = 8
        let opts = CoherenceOptions { dt: 1.5e-3, horizon: 25.0, fit_start: 8.0, sample_every: 64 };
        let res = sideband_dephasing_estimate(&spec, true, Some(opts)).unwrap();
        let ratio = res.estimate.rate / res.closed_form;
        assert!(
            (0.75..1.35).contains(&ratio),
            "numeric {} vs closed {} (ratio {ratio})",
            res.estimate.rate,
            res.closed_form
        );
    }
}
