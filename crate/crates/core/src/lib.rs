//! Simulation engine for multi-qubit parity readout through the bifurcation
//! of a parametrically driven Kerr resonator.
//!
//! The crate covers: dense/sparse operator algebra on truncated Fock spaces,
//! Hamiltonian and collapse-operator construction in the rotating frame,
//! homodyne stochastic trajectories (pure-state and density-matrix
//! unravelings) with a deterministic Lindblad reference, signal integration
//! and threshold classification, two-qubit concurrence, closed-form
//! steady-state/dephasing predictions, and the filtered four-qubit blocks.
//!
//! All rates are expressed in units of the resonator linewidth kappa and all
//! times in 1/kappa. The crate is `no_std`-compatible (with `alloc`); IO,
//! parallel ensembles, and file formats live in the companion CLI crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analytics;
pub mod coherence;
pub mod entanglement;
pub mod error;
pub mod fourqubit;
pub mod hilbert;
pub mod integrate;
pub mod matrix;
pub mod model;
pub mod operators;
pub mod rng;
pub mod signal;
pub mod sparse;
pub mod state;
pub mod trajectory;

pub use error::{Error, Result};
pub use hilbert::HilbertLayout;
pub use matrix::CMatrix;
pub use model::ModelSpec;
pub use operators::OperatorMatrix;
pub use state::QuantumState;

pub use num_complex::Complex64;
