//! From homodyne records to parity decisions: signal integration, threshold
//! training, classification and fidelity statistics.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::Parity;
use crate::trajectory::TrajectoryRecord;

/// Threshold classifier on the integrated signal: |s| above the threshold
/// decides odd.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassifierModel {
    pub threshold: f64,
}

impl ClassifierModel {
    pub fn classify(&self, s: f64) -> Parity {
        if s.abs() > self.threshold {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

/// Integrated signal `s(tau) = sqrt(rate) * integral_0^tau j dt`, linearly
/// interpolated between stored bin boundaries.
pub fn integrate_signal(record: &TrajectoryRecord, tau: f64) -> Result<f64> {
    let end = record.j_samples.len() as f64 * record.sample_dt;
    if tau < 0.0 || tau > end + 1e-9 {
        return Err(Error::TauBeyondRecord { tau, end });
    }
    let prefix = record.signal_prefix();
    Ok(signal_at(&prefix, record.sample_dt, tau))
}

/// s(tau) from a precomputed prefix array. Exact at bin boundaries.
pub fn signal_at(prefix: &[f64], sample_dt: f64, tau: f64) -> f64 {
    let pos = tau / sample_dt;
    let idx = pos.floor() as usize;
    if idx + 1 >= prefix.len() {
        return *prefix.last().unwrap_or(&0.0);
    }
    let frac = pos - idx as f64;
    if frac <= 1e-9 {
        prefix[idx]
    } else {
        prefix[idx] * (1.0 - frac) + prefix[idx + 1] * frac
    }
}

/// Train the |s|-threshold maximizing balanced accuracy
/// `1/2 [P(even|even) + P(odd|odd)]` over labeled records. Candidate
/// thresholds are midpoints of adjacent sorted |s| values plus sentinels;
/// ties break toward the larger threshold.
pub fn optimize_threshold(training: &[&TrajectoryRecord], tau: f64) -> Result<ClassifierModel> {
    let mut scored: Vec<(f64, Parity)> = Vec::with_capacity(training.len());
    let mut seen_even = false;
    let mut seen_odd = false;
    for rec in training {
        let parity = rec.true_parity.ok_or(Error::DegenerateTrainingSet)?;
        match parity {
            Parity::Even => seen_even = true,
            Parity::Odd => seen_odd = true,
        }
        scored.push((integrate_signal(rec, tau)?.abs(), parity));
    }
    if !seen_even || !seen_odd {
        return Err(Error::DegenerateTrainingSet);
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut candidates = Vec::with_capacity(scored.len() + 1);
    candidates.push(0.0);
    for w in scored.windows(2) {
        candidates.push(0.5 * (w[0].0 + w[1].0));
    }
    candidates.push(scored.last().unwrap().0 + 1.0);

    let n_even = scored.iter().filter(|x| x.1 == Parity::Even).count() as f64;
    let n_odd = scored.len() as f64 - n_even;
    let mut best = (f64::MIN, 0.0f64);
    for &th in &candidates {
        let mut even_correct = 0.0;
        let mut odd_correct = 0.0;
        for &(s, p) in &scored {
            match p {
                Parity::Even if s <= th => even_correct += 1.0,
                Parity::Odd if s > th => odd_correct += 1.0,
                _ => {}
            }
        }
        let acc = 0.5 * (even_correct / n_even + odd_correct / n_odd);
        // >= breaks ties toward the larger threshold (candidates ascend).
        if acc >= best.0 {
            best = (acc, th);
        }
    }
    Ok(ClassifierModel { threshold: best.1 })
}

/// Fidelity estimate with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FidelityEstimate {
    pub f_m: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_even: usize,
    pub n_odd: usize,
}

/// Wilson score interval for k successes out of n at 95% confidence.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Balanced accuracy of the classifier on labeled test records at time tau.
/// The Wilson interval is built per class and averaged, matching the
/// definition of the balanced accuracy as the mean of two binomials.
pub fn measurement_fidelity(
    test: &[&TrajectoryRecord],
    model: &ClassifierModel,
    tau: f64,
) -> Result<FidelityEstimate> {
    if test.is_empty() {
        return Err(Error::DegenerateTrainingSet);
    }
    let mut n_even = 0usize;
    let mut n_odd = 0usize;
    let mut even_correct = 0usize;
    let mut odd_correct = 0usize;
    for rec in test {
        let parity = rec.true_parity.ok_or(Error::DegenerateTrainingSet)?;
        let decision = model.classify(integrate_signal(rec, tau)?);
        match parity {
            Parity::Even => {
                n_even += 1;
                if decision == Parity::Even {
                    even_correct += 1;
                }
            }
            Parity::Odd => {
                n_odd += 1;
                if decision == Parity::Odd {
                    odd_correct += 1;
                }
            }
        }
    }
    if n_even == 0 || n_odd == 0 {
        return Err(Error::DegenerateTrainingSet);
    }
    let pe = even_correct as f64 / n_even as f64;
    let po = odd_correct as f64 / n_odd as f64;
    let (lo_e, hi_e) = wilson_interval(even_correct, n_even);
    let (lo_o, hi_o) = wilson_interval(odd_correct, n_odd);
    Ok(FidelityEstimate {
        f_m: 0.5 * (pe + po),
        ci_lo: 0.5 * (lo_e + lo_o),
        ci_hi: 0.5 * (hi_e + hi_o),
        n_even,
        n_odd,
    })
}

/// One row of the fidelity-vs-time table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FidelityPoint {
    pub tau: f64,
    pub f_m: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub threshold: f64,
}

/// Fidelity curve over a tau grid with a held-out threshold: records are
/// split 50/50 by position (the caller orders them by disjoint seed ranges),
/// the threshold is trained per tau on the first half and evaluated on the
/// second.
pub fn fidelity_curve(records: &[&TrajectoryRecord], tau_grid: &[f64]) -> Result<Vec<FidelityPoint>> {
    if records.len() < 4 {
        return Err(Error::DegenerateTrainingSet);
    }
    let mid = records.len() / 2;
    let (train, test) = records.split_at(mid);
    let mut out = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let model = optimize_threshold(train, tau)?;
        let est = measurement_fidelity(test, &model, tau)?;
        out.push(FidelityPoint {
            tau,
            f_m: est.f_m,
            ci_lo: est.ci_lo,
            ci_hi: est.ci_hi,
            threshold: model.threshold,
        });
    }
    Ok(out)
}
