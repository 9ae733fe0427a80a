//! Frequency and mean convergence of relevant-set samples.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::algebra::{spectrum, Observable};
use crate::ensemble::{
    relevant_values, sample_relevant_set_partitioned, QuantumState, SamplingPlan, EVENT_SLACK,
};
use crate::error::{Error, Result};
use crate::physical_state::TrialCounter;

/// Smallest sample count accepted by [`verify_quantum_average`].
pub const MIN_AVERAGE_SAMPLES: usize = 100;
/// Width of the convergence gate in standard errors.
pub const GATE_SIGMAS: f64 = 3.0;

pub fn empirical_mean(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Fraction of samples with value `<= a`.
pub fn empirical_event_frequency(samples: &[f64], a: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let hits = samples.iter().filter(|&&v| v <= a + EVENT_SLACK).count();
    Ok(hits as f64 / samples.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrailPoint {
    pub n: usize,
    pub running_mean: f64,
}

/// Running means at `n = 1, 2, 4, ...` up to the sample size.
pub fn doubling_trail(samples: &[f64]) -> Vec<TrailPoint> {
    let mut trail = Vec::new();
    let mut sum = 0.0;
    let mut next = 1;
    for (k, v) in samples.iter().enumerate() {
        sum += v;
        if k + 1 == next {
            trail.push(TrailPoint {
                n: next,
                running_mean: sum / next as f64,
            });
            next *= 2;
        }
    }
    trail
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n: usize,
    pub empirical_mean: f64,
    pub target: f64,
    pub deviation: f64,
    /// Half the spectral spread of the observable.
    pub sigma_max: f64,
    pub bound: f64,
    pub passed: bool,
    pub trail: Vec<TrailPoint>,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_trail_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for point in &self.trail {
            writer.serialize(point)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Samples `n` trials of `a` under `psi` and gates the empirical mean
/// against `Psi(A)` at `3 sigma_max / sqrt(n)`.
pub fn verify_quantum_average(
    psi: &QuantumState,
    a: &Observable,
    n: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    verify_quantum_average_with(psi, a, n, SamplingPlan::new(seed), TrialCounter::global())
}

pub fn verify_quantum_average_with(
    psi: &QuantumState,
    a: &Observable,
    n: usize,
    plan: SamplingPlan,
    counter: &TrialCounter,
) -> Result<ConvergenceReport> {
    if n < MIN_AVERAGE_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n,
            min: MIN_AVERAGE_SAMPLES,
        });
    }
    let states = sample_relevant_set_partitioned(psi, a, n, plan, counter)?;
    let samples = relevant_values(&states, a)?;
    let mean = empirical_mean(&samples)?;
    let target = psi.expectation_real(a)?;
    let spec = spectrum(a);
    let spread = spec.last().map(|p| p.value).unwrap_or(0.0) - spec.first().map(|p| p.value).unwrap_or(0.0);
    let sigma_max = spread / 2.0;
    let bound = GATE_SIGMAS * sigma_max / (n as f64).sqrt();
    let deviation = (mean - target).abs();
    Ok(ConvergenceReport {
        n,
        empirical_mean: mean,
        target,
        deviation,
        sigma_max,
        bound,
        passed: deviation <= bound,
        trail: doubling_trail(&samples),
    })
}
