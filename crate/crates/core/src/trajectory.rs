//! Single-trajectory simulation and the on-disk-facing record type.
//!
//! A record stores the homodyne current as exact block averages: bin b holds
//! `(1/sample_dt) * integral of j over the bin`, so the integrated signal at
//! any bin boundary recomputes bit-exactly from the stored samples while the
//! raw per-step stream (tens of thousands of samples per trajectory) never
//! needs to be persisted. Conditioned-state checkpoints are taken on a
//! coarser cadence.
//!
//! Trajectories are pure functions of (setup, seed): the noise comes from the
//! counter-based stream keyed by the seed, so ensembles are reproducible
//! regardless of scheduling. Parallelism over trajectories belongs to the
//! caller; a step never mutates anything shared.

use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::integrate::{sme_step, IntegratorConfig, SsePropagator};
use crate::matrix::CMatrix;
use crate::model::{CollapseChannel, Parity, TimeDependentHamiltonian};
use crate::operators::tail_projector_diag;
use crate::sparse::CsrMatrix;
use crate::state::QuantumState;

/// Population allowed in the top two Fock levels before a run is declared
/// invalid.
pub const TAIL_THRESHOLD: f64 = 1e-6;

/// Conditioned-state snapshot along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tau: f64,
    /// <a> of the resonator mode.
    pub exp_a: Complex64,
    /// <a+a> of the resonator mode.
    pub exp_n: f64,
    /// Top-two-level population across all modes.
    pub tail: f64,
    /// Reduced qubit density matrix, when requested and qubits exist.
    pub rho_qubits: Option<CMatrix>,
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// Integrator step size.
    pub dt: f64,
    /// Width of one stored current bin.
    pub sample_dt: f64,
    /// Rate of the measured channel (enters s(tau) as sqrt(rate)).
    pub measured_rate: f64,
    pub tau_max: f64,
    /// Exact block averages of the homodyne current.
    pub j_samples: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub true_parity: Option<Parity>,
}

impl TrajectoryRecord {
    /// Times of the stored current bins' right edges.
    pub fn sample_times(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.j_samples.len()).map(move |k| k as f64 * self.sample_dt)
    }

    /// Integrated signal s at every bin boundary (s[0] = 0 at tau = 0):
    /// `s(tau_k) = sqrt(rate) * sum_{b<k} j_b * sample_dt`. Plain left-to-right
    /// summation; recomputation reproduces stored aggregates bit-exactly.
    pub fn signal_prefix(&self) -> Vec<f64> {
        let sqrt_rate = self.measured_rate.sqrt();
        let mut out = Vec::with_capacity(self.j_samples.len() + 1);
        let mut acc = 0.0f64;
        out.push(0.0);
        for &j in &self.j_samples {
            acc += sqrt_rate * j * self.sample_dt;
            out.push(acc);
        }
        out
    }
}

/// Everything needed to run one trajectory, independent of the seed.
#[derive(Debug, Clone)]
pub struct TrajectorySetup {
    pub hamiltonian: TimeDependentHamiltonian,
    pub channels: Vec<CollapseChannel>,
    pub measured: usize,
    pub integrator: IntegratorConfig,
    pub initial: QuantumState,
    pub tau_max: f64,
    pub sample_dt: f64,
    pub checkpoint_dt: f64,
    /// Store reduced qubit density matrices at checkpoints.
    pub store_qubit_state: bool,
    pub true_parity: Option<Parity>,
}

impl TrajectorySetup {
    fn steps_per(&self, interval: f64, name: &str) -> Result<usize> {
        let ratio = interval / self.integrator.dt;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-6 {
            return Err(Error::InvalidParameter(alloc::format!(
                "{name} ({interval}) must be a positive multiple of dt ({})",
                self.integrator.dt
            )));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if self.initial.layout() != self.hamiltonian.layout() {
            return Err(Error::LayoutMismatch);
        }
        if !(self.tau_max > 0.0) {
            return Err(Error::InvalidParameter(String::from("tau_max must be positive")));
        }
        self.steps_per(self.sample_dt, "sample_dt")?;
        self.steps_per(self.checkpoint_dt, "checkpoint_dt")?;
        Ok(())
    }
}

/// Run one pure-state (homodyne SSE) trajectory. Fails with
/// [`Error::TruncationTail`] the moment the tail monitor trips.
pub fn simulate_sse_trajectory(setup: &TrajectorySetup, seed: u64) -> Result<TrajectoryRecord> {
    setup.validate()?;
    let layout = setup.hamiltonian.layout().clone();
    let mut prop =
        SsePropagator::new(&setup.hamiltonian, &setup.channels, setup.measured, &setup.integrator)?;
    let mut psi: Vec<Complex64> = setup
        .initial
        .amplitudes()
        .ok_or_else(|| {
            Error::UnsupportedUnraveling(String::from("SSE trajectories need a pure initial state"))
        })?
        .to_vec();

    let dt = setup.integrator.dt;
    let bin_steps = setup.steps_per(setup.sample_dt, "sample_dt")?;
    let ckpt_steps = setup.steps_per(setup.checkpoint_dt, "checkpoint_dt")?;
    let total_steps = (setup.tau_max / dt).round() as usize;
    let rate = setup.channels[setup.measured].rate;
    let sqrt_rate = rate.sqrt();

    let a_csr = CsrMatrix::from_dense(
        crate::operators::destroy_on(&layout, 0)?.matrix(),
        0.0,
    );
    let n_diag: Vec<f64> = {
        let slot = layout.mode_slot(0)?;
        (0..layout.total_dim()).map(|i| layout.digits(i)[slot] as f64).collect()
    };
    let tail_diag = tail_projector_diag(&layout);
    let keep_qubits: Vec<usize> = (0..layout.qubit_count()).collect();

    let mut ws = crate::rng::WienerStream::new(seed);
    let mut j_samples = Vec::with_capacity(total_steps / bin_steps);
    let mut checkpoints = Vec::new();
    let mut bin_acc = 0.0f64;
    let mut apsi = alloc::vec![Complex64::new(0.0, 0.0); layout.total_dim()];

    let take_checkpoint = |psi: &[Complex64],
                               tau: f64,
                               apsi: &mut [Complex64],
                               checkpoints: &mut Vec<Checkpoint>|
     -> Result<()> {
        a_csr.matvec(psi, apsi);
        let exp_a: Complex64 = psi.iter().zip(apsi.iter()).map(|(p, v)| p.conj() * v).sum();
        let exp_n: f64 = psi.iter().zip(&n_diag).map(|(p, &n)| n * p.norm_sqr()).sum();
        let tail: f64 = psi.iter().zip(&tail_diag).map(|(p, &d)| d * p.norm_sqr()).sum();
        if tail > TAIL_THRESHOLD {
            return Err(Error::TruncationTail { population: tail, threshold: TAIL_THRESHOLD });
        }
        let rho_qubits = if setup.store_qubit_state && !keep_qubits.is_empty() {
            let st = QuantumState::pure(layout.clone(), psi.to_vec())?;
            Some(st.partial_trace(&keep_qubits)?.density_matrix())
        } else {
            None
        };
        checkpoints.push(Checkpoint { tau, exp_a, exp_n, tail, rho_qubits });
        Ok(())
    };

    take_checkpoint(&psi, 0.0, &mut apsi, &mut checkpoints)?;
    for step in 0..total_steps {
        let t = step as f64 * dt;
        let dw = ws.next_dw(dt);
        let sample = prop.step(&mut psi, t, dw)?;
        // integral of j over the step: x dt + dW.
        bin_acc += sqrt_rate * sample.quadrature * dt + dw;
        if (step + 1) % bin_steps == 0 {
            j_samples.push(bin_acc / setup.sample_dt);
            bin_acc = 0.0;
        }
        if (step + 1) % ckpt_steps == 0 {
            take_checkpoint(&psi, (step + 1) as f64 * dt, &mut apsi, &mut checkpoints)?;
        }
    }

    Ok(TrajectoryRecord {
        seed,
        dt,
        sample_dt: setup.sample_dt,
        measured_rate: rate,
        tau_max: setup.tau_max,
        j_samples,
        checkpoints,
        true_parity: setup.true_parity,
    })
}

/// Run one density-matrix (homodyne SME) trajectory. Slower than the pure
/// path; used for small instances and as the reference unraveling.
pub fn simulate_sme_trajectory(setup: &TrajectorySetup, seed: u64) -> Result<TrajectoryRecord> {
    setup.validate()?;
    let layout = setup.hamiltonian.layout().clone();
    let dt = setup.integrator.dt;
    let bin_steps = setup.steps_per(setup.sample_dt, "sample_dt")?;
    let ckpt_steps = setup.steps_per(setup.checkpoint_dt, "checkpoint_dt")?;
    let total_steps = (setup.tau_max / dt).round() as usize;
    let rate = setup.channels[setup.measured].rate;
    let sqrt_rate = rate.sqrt();
    let theta = setup.integrator.measured_phase;

    let mut state = setup.initial.to_density();
    let a_op = crate::operators::destroy_on(&layout, 0)?;
    let m_op = a_op.scale(Complex64::from_polar(sqrt_rate, -theta));
    let n_diag: Vec<f64> = {
        let slot = layout.mode_slot(0)?;
        (0..layout.total_dim()).map(|i| layout.digits(i)[slot] as f64).collect()
    };
    let tail_diag = tail_projector_diag(&layout);
    let keep_qubits: Vec<usize> = (0..layout.qubit_count()).collect();

    let mut ws = crate::rng::WienerStream::new(seed);
    let mut j_samples = Vec::with_capacity(total_steps / bin_steps);
    let mut checkpoints = Vec::new();
    let mut bin_acc = 0.0f64;

    let take_checkpoint = |state: &QuantumState, tau: f64, checkpoints: &mut Vec<Checkpoint>| -> Result<()> {
        let rho = state.density_matrix();
        let exp_a = state.expectation(&a_op)?;
        let exp_n: f64 = (0..rho.nrows()).map(|i| n_diag[i] * rho[(i, i)].re).sum();
        let tail: f64 = (0..rho.nrows()).map(|i| tail_diag[i] * rho[(i, i)].re).sum();
        if tail > TAIL_THRESHOLD {
            return Err(Error::TruncationTail { population: tail, threshold: TAIL_THRESHOLD });
        }
        let rho_qubits = if setup.store_qubit_state && !keep_qubits.is_empty() {
            Some(state.partial_trace(&keep_qubits)?.density_matrix())
        } else {
            None
        };
        checkpoints.push(Checkpoint { tau, exp_a, exp_n, tail, rho_qubits });
        Ok(())
    };

    take_checkpoint(&state, 0.0, &mut checkpoints)?;
    for step in 0..total_steps {
        let t = step as f64 * dt;
        let dw = ws.next_dw(dt);
        // Quadrature before the update, consistent with the current sample.
        let x = 2.0 * state.expectation(&m_op)?.re;
        state = sme_step(
            &state,
            &setup.hamiltonian,
            &setup.channels,
            Some(setup.measured),
            &setup.integrator,
            t,
            dw,
        )?;
        bin_acc += sqrt_rate * x * dt + dw;
        if (step + 1) % bin_steps == 0 {
            j_samples.push(bin_acc / setup.sample_dt);
            bin_acc = 0.0;
        }
        if (step + 1) % ckpt_steps == 0 {
            take_checkpoint(&state, (step + 1) as f64 * dt, &mut checkpoints)?;
        }
    }

    Ok(TrajectoryRecord {
        seed,
        dt,
        sample_dt: setup.sample_dt,
        measured_rate: rate,
        tau_max: setup.tau_max,
        j_samples,
        checkpoints,
        true_parity: setup.true_parity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::Scheme;
    use crate::model::{build_collapse_ops, build_kerr_resonator, ModelSpec};

    fn vacuum_setup(eps: f64, kerr: f64, dim: usize, dt: f64, tau: f64) -> TrajectorySetup {
        let spec = ModelSpec::bare_resonator(eps, kerr, dim);
        let layout = spec.layout().unwrap();
        TrajectorySetup {
            hamiltonian: TimeDependentHamiltonian::time_independent(
                build_kerr_resonator(&spec).unwrap(),
            ),
            channels: build_collapse_ops(&spec).unwrap(),
            measured: 0,
            integrator: IntegratorConfig { dt, scheme: Scheme::SplitStepEuler, ..Default::default() },
            initial: QuantumState::vacuum(layout),
            tau_max: tau,
            sample_dt: 0.01,
            checkpoint_dt: 0.05,
            store_qubit_state: false,
            true_parity: None,
        }
    }

    #[test]
    fn record_shapes_and_determinism() {
        let setup = vacuum_setup(0.8, 0.4, 14, 1e-3, 1.0);
        let r1 = simulate_sse_trajectory(&setup, 42).unwrap();
        let r2 = simulate_sse_trajectory(&setup, 42).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.j_samples.len(), 100);
        assert_eq!(r1.checkpoints.len(), 21);
        let r3 = simulate_sse_trajectory(&setup, 43).unwrap();
        assert_ne!(r1.j_samples, r3.j_samples);
    }

    #[test]
    fn signal_prefix_recomputes_bit_exactly() {
        let setup = vacuum_setup(1.2, 0.5, 16, 1e-3, 2.0);
        let r = simulate_sse_trajectory(&setup, 7).unwrap();
        let s1 = r.signal_prefix();
        let s2 = r.signal_prefix();
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), r.j_samples.len() + 1);
        assert_eq!(s1[0], 0.0);
    }

    #[test]
    fn vacuum_undriven_current_is_pure_noise() {
        // No drive: E[s(tau)] = 0, Var[s(tau)] = kappa * tau.
        let setup = vacuum_setup(0.0, 0.0, 8, 1e-3, 1.0);
        let n = 400;
        let tau = setup.tau_max;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for seed in 0..n {
            let r = simulate_sse_trajectory(&setup, seed).unwrap();
            let s = *r.signal_prefix().last().unwrap();
            sum += s;
            sq += s * s;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 * (tau / n as f64).sqrt(), "mean {mean}");
        assert!((var - tau).abs() < 0.25 * tau, "var {var} vs {tau}");
    }

    #[test]
    fn tail_violation_aborts() {
        // A 8-level space cannot hold a |alpha|^2 ~ 3.5 bifurcation.
        let setup = vacuum_setup(2.0, 0.5, 8, 1e-3, 5.0);
        let err = simulate_sse_trajectory(&setup, 3).unwrap_err();
        assert!(matches!(err, Error::TruncationTail { .. }), "{err}");
    }

    #[test]
    fn sme_record_matches_sse_statistics_loosely() {
        // Same seed gives the same noise stream; the two unravelings follow
        // the same current statistics (not pathwise identical).
        let setup = vacuum_setup(1.0, 0.4, 20, 1e-3, 1.0);
        let r_sse = simulate_sse_trajectory(&setup, 11).unwrap();
        let r_sme = simulate_sme_trajectory(&setup, 11).unwrap();
        assert_eq!(r_sse.j_samples.len(), r_sme.j_samples.len());
        let s_sse = *r_sse.signal_prefix().last().unwrap();
        let s_sme = *r_sme.signal_prefix().last().unwrap();
        // Shared noise dominates the signal here.
        assert!((s_sse - s_sme).abs() < 1.0, "{s_sse} vs {s_sme}");
    }

    #[test]
    fn misaligned_cadence_rejected() {
        let mut setup = vacuum_setup(1.0, 0.4, 12, 1e-3, 1.0);
        setup.sample_dt = 0.0015;
        assert!(simulate_sse_trajectory(&setup, 1).is_err());
    }
}
