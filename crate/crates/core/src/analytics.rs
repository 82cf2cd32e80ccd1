//! Closed-form results: bifurcation amplitude and phase, classical stability,
//! dephasing rates, squeezed-pointer overlaps. This module doubles as the
//! oracle layer for the simulation tests.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Above-threshold steady state of the driven Kerr resonator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SteadyStatePrediction {
    /// |alpha_o| of the two latched branches; 0 below threshold.
    pub alpha_mag: f64,
    /// Steady-state phase Arg[alpha_o] in the classical-quadrature convention.
    pub theta_o: f64,
    /// Stability eigenvalues of the vacuum fixed point.
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// 1/lambda_plus, the vacuum escape timescale (infinite below threshold).
    pub bifurcation_timescale: f64,
}

impl SteadyStatePrediction {
    pub fn photon_number(&self) -> f64 {
        self.alpha_mag * self.alpha_mag
    }

    pub fn above_threshold(&self) -> bool {
        self.alpha_mag > 0.0
    }
}

/// Steady-state phase `theta_o = (1/2) atan(kappa / sqrt(4 eps^2 - kappa^2))`
/// for an above-threshold drive; 0 otherwise.
pub fn steady_state_angle(eps_p: f64, kappa: f64) -> f64 {
    let disc = 4.0 * eps_p * eps_p - kappa * kappa;
    if disc > 0.0 {
        0.5 * (kappa / disc.sqrt()).atan()
    } else {
        0.0
    }
}

/// Total linewidth seen by the nonlinear resonator: the output plus internal
/// loss for the directly measured models, and the filter-mediated decay
/// `kappa_eff = g^2/kappa_f` plus internal loss for the four-qubit model
/// (whose resonator has no direct output channel).
pub fn effective_linewidth(spec: &ModelSpec) -> f64 {
    if spec.qubit_count == 4 {
        let keff = if spec.kappa_f > 0.0 { spec.g * spec.g / spec.kappa_f } else { 0.0 };
        keff + spec.kappa_int
    } else {
        spec.kappa + spec.kappa_int
    }
}

/// Closed-form steady-state amplitude, phase and vacuum stability:
/// `|alpha_o| = ((eps^2 - kappa^2/4)/K^2)^{1/4}` above the threshold
/// `eps_p > kappa/2`, `lambda_+- = +-eps_p - kappa/2`, with kappa the
/// [`effective_linewidth`] of the configured model.
pub fn steady_state(spec: &ModelSpec) -> Result<SteadyStatePrediction> {
    let eps = spec.eps_p;
    let kappa = effective_linewidth(spec);
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(String::from("total linewidth must be positive")));
    }
    let above = eps > kappa / 2.0;
    if above && spec.kerr == 0.0 {
        return Err(Error::InvalidParameter(String::from(
            "above threshold the amplitude is undefined for K = 0",
        )));
    }
    let alpha_mag = if above {
        ((eps * eps - kappa * kappa / 4.0) / (spec.kerr * spec.kerr)).powf(0.25)
    } else {
        0.0
    };
    let lambda_plus = eps - kappa / 2.0;
    let lambda_minus = -eps - kappa / 2.0;
    Ok(SteadyStatePrediction {
        alpha_mag,
        theta_o: steady_state_angle(eps, kappa),
        lambda_plus,
        lambda_minus,
        bifurcation_timescale: if lambda_plus > 0.0 { 1.0 / lambda_plus } else { f64::INFINITY },
    })
}

/// Classical equations of motion for the field quadratures of the resonantly
/// driven nonlinear resonator, `x = <a + a+>/2`, `y = -i<a - a+>/2`:
///
/// dx/dt = K (x^2 + y^2) y + eps_p y - (kappa/2) x
/// dy/dt = -K (x^2 + y^2) x + eps_p x - (kappa/2) y
pub fn classical_eom_rhs(x: f64, y: f64, spec: &ModelSpec) -> (f64, f64) {
    let n = x * x + y * y;
    let k = spec.kerr;
    let eps = spec.eps_p;
    let half_kappa = 0.5 * spec.kappa;
    (k * n * y + eps * y - half_kappa * x, -k * n * x + eps * x - half_kappa * y)
}

/// Closed-form dephasing rates and pointer-state overlap.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DephasingRates {
    /// Even-subspace rate kappa (eps_p / 4chi)^2 from the squeezed-pointer
    /// overlap. (The alternative reading kappa (eps_p/2chi)^2 appears in
    /// [`DephasingRates::gamma_e_upper`]; the numeric oracle sides with this
    /// field.)
    pub gamma_e: f64,
    /// The 4x larger variant kappa (eps_p / 2chi)^2.
    pub gamma_e_upper: f64,
    /// Unfiltered odd-subspace rate kappa |alpha_o|^2 of the naive multi-tone
    /// scheme.
    pub gamma_o_naive: f64,
    /// Filtered odd-subspace rate kappa_eff |alpha_o|^2 / (1 + (8chi/kappa_f)^2).
    pub gamma_o_eff: f64,
    /// Effective resonator decay through the filter, g^2/kappa_f.
    pub kappa_eff: f64,
    /// Internal-loss odd-subspace rate kappa_int |alpha_o|^2.
    pub gamma_o_int: f64,
    /// Squeezing parameter eps_p / 4chi of the even-subspace pointers.
    pub squeeze_r: f64,
    /// Overlap of the two squeezed pointers, 1/sqrt(cosh 2r).
    pub pointer_overlap: f64,
}

/// Evaluate every closed-form rate for the given parameters.
pub fn dephasing_rates(spec: &ModelSpec) -> Result<DephasingRates> {
    if spec.chi == 0.0 {
        return Err(Error::InvalidParameter(String::from("dephasing rates need chi != 0")));
    }
    let ss = steady_state(spec)?;
    let n_o = ss.photon_number();
    let r = spec.eps_p / (4.0 * spec.chi);
    let kappa_eff = if spec.kappa_f > 0.0 { spec.g * spec.g / spec.kappa_f } else { 0.0 };
    let lorentz = if spec.kappa_f > 0.0 {
        let x = 8.0 * spec.chi / spec.kappa_f;
        1.0 / (1.0 + x * x)
    } else {
        0.0
    };
    Ok(DephasingRates {
        gamma_e: spec.kappa * r * r,
        gamma_e_upper: spec.kappa * (spec.eps_p / (2.0 * spec.chi)).powi(2),
        gamma_o_naive: spec.kappa * n_o,
        gamma_o_eff: kappa_eff * n_o * lorentz,
        kappa_eff,
        gamma_o_int: spec.kappa_int * n_o,
        squeeze_r: r,
        pointer_overlap: 1.0 / (2.0 * r).cosh().sqrt(),
    })
}

/// Log-linear least-squares exponential fit `y ~ A e^{-rate t}` over the
/// samples with `t` inside `[t_min, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFit {
    pub rate: f64,
    pub amplitude: f64,
    /// RMS residual of ln(y) against the fit line.
    pub residual: f64,
    pub points_used: usize,
}

pub fn fit_exponential_decay(ts: &[f64], ys: &[f64], t_min: f64, t_max: f64) -> Result<ExpFit> {
    assert_eq!(ts.len(), ys.len());
    let mut xs = Vec::new();
    let mut ls = Vec::new();
    for (&t, &y) in ts.iter().zip(ys) {
        if t >= t_min && t <= t_max && y > 0.0 {
            xs.push(t);
            ls.push(y.ln());
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InvalidParameter(String::from(
            "exponential fit needs at least 3 positive samples in the window",
        )));
    }
    let nf = n as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ls.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| x * y).sum();
    let denom = nf * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InvalidParameter(String::from("degenerate fit window")));
    }
    let slope = (nf * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / nf;
    let mut ss = 0.0;
    for (x, l) in xs.iter().zip(&ls) {
        let r = l - (slope * x + intercept);
        ss += r * r;
    }
    Ok(ExpFit {
        rate: -slope,
        amplitude: intercept.exp(),
        residual: (ss / nf).sqrt(),
        points_used: n,
    })
}
