//! Canned experiments on the spin pair and the truncated oscillator.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    c, kron_observables, make_unity, pauli_x, pauli_z, spin_xz, AlgebraElement, CMatrix, Observable,
};
use crate::context::{context_from, MeasurementContext};
use crate::ensemble::{sample_context, QuantumState, SamplingPlan};
use crate::error::{Error, Result};
use crate::physical_state::{PhysicalState, TrialCounter};

/// Smallest per-setting sample count for a CHSH run.
pub const MIN_CHSH_SAMPLES: usize = 100;
const SAME_VALUE_TOL: f64 = 1e-8;

/// Swap of the two tensor factors of `C^2 (x) C^2`.
pub fn swap_matrix() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            m[(2 * j + i, 2 * i + j)] = c(1.0, 0.0);
        }
    }
    m
}

/// Spin component of particle A (`which = 0`) or B (`which = 1`).
pub fn local_spin(op: &Observable, which: usize) -> Observable {
    let id = Observable::unity(2).expect("dim 2");
    if which == 0 {
        kron_observables(op, &id)
    } else {
        kron_observables(&id, op)
    }
}

/// The singlet: the state with total `S_z = 0` and swap eigenvalue `-1`.
pub fn singlet_state() -> Result<QuantumState> {
    let z = pauli_z();
    let total = local_spin(&z, 0).combine(1.0, &local_spin(&z, 1), 1.0)?;
    let swap = Observable::from_matrix(swap_matrix())?;
    let ctx = context_from(vec![("Sz_total".into(), total), ("SWAP".into(), swap)])?;
    QuantumState::from_label(&ctx, &[("Sz_total", 0.0), ("SWAP", -1.0)])
}

/// Joint context of spin A along `theta_a` and spin B along `theta_b`
/// (directions in the x-z plane).
pub fn pair_context(theta_a: f64, theta_b: f64) -> Result<Arc<MeasurementContext>> {
    pair_context_named(theta_a, theta_b, format!("S({theta_a})(A)"), format!("S({theta_b})(B)"))
}

fn pair_context_named(
    theta_a: f64,
    theta_b: f64,
    name_a: String,
    name_b: String,
) -> Result<Arc<MeasurementContext>> {
    context_from(vec![
        (name_a, local_spin(&spin_xz(theta_a), 0)),
        (name_b, local_spin(&spin_xz(theta_b), 1)),
    ])
}

fn pair_values(states: &[PhysicalState]) -> Vec<(f64, f64)> {
    states
        .iter()
        .map(|s| {
            let chi = s.home_character();
            (chi.generator_value(0), chi.generator_value(1))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub axis: String,
    pub n: usize,
    pub anticorrelated: usize,
    pub anticorrelation_frequency: f64,
    /// Frequency of `S(A) = +1`.
    pub marginal_a_plus: f64,
    /// `3 sqrt(1/4n)` around the Born marginal `1/2`.
    pub marginal_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EprReport {
    pub n: usize,
    pub seed: u64,
    pub partitions: usize,
    pub axes: Vec<AxisReport>,
    pub passed: bool,
}

/// Singlet decay measured along z and along x in fresh trials.
pub fn run_epr_bohm(n: usize, plan: SamplingPlan) -> Result<EprReport> {
    if n == 0 {
        return Err(Error::TooFewSamples { got: 0, min: 1 });
    }
    let psi = singlet_state()?;
    let counter = TrialCounter::default();
    let mut axes = Vec::new();
    for (k, (axis, op)) in [("z", pauli_z()), ("x", pauli_x())].into_iter().enumerate() {
        let ctx = context_from(vec![
            (format!("S{axis}(A)"), local_spin(&op, 0)),
            (format!("S{axis}(B)"), local_spin(&op, 1)),
        ])?;
        let states = sample_context(&psi, &ctx, n, plan.substream(k as u64), counter.reserve(n))?;
        let pairs = pair_values(&states);
        let anticorrelated = pairs
            .iter()
            .filter(|(a, b)| (a + b).abs() <= SAME_VALUE_TOL)
            .count();
        let plus = pairs.iter().filter(|(a, _)| *a > 0.0).count();
        axes.push(AxisReport {
            axis: axis.to_string(),
            n,
            anticorrelated,
            anticorrelation_frequency: anticorrelated as f64 / n as f64,
            marginal_a_plus: plus as f64 / n as f64,
            marginal_bound: 3.0 * (0.25 / n as f64).sqrt(),
        });
    }
    let passed = axes.iter().all(|a| a.anticorrelated == a.n);
    Ok(EprReport {
        n,
        seed: plan.seed,
        partitions: plan.partitions,
        axes,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorEstimate {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub empirical: f64,
    /// `Psi(sigma_a (x) sigma_b)` from the singlet vector.
    pub target: f64,
    pub first_trial: u64,
    pub last_trial: u64,
}

fn correlator_from_states(
    a: f64,
    b: f64,
    psi: &QuantumState,
    states: &[PhysicalState],
) -> Result<CorrelatorEstimate> {
    let product: f64 = pair_values(states).iter().map(|(x, y)| x * y).sum();
    let joint = local_spin(&spin_xz(a), 0).mul(&local_spin(&spin_xz(b), 1))?;
    Ok(CorrelatorEstimate {
        a,
        b,
        n: states.len(),
        empirical: product / states.len() as f64,
        target: psi.expectation(&joint)?.re,
        first_trial: states.first().map_or(0, |s| s.trial_id()),
        last_trial: states.last().map_or(0, |s| s.trial_id()),
    })
}

/// Empirical `E(a, b)`: mean product of the two spin outcomes in the joint
/// context, one fresh trial per sample.
pub fn singlet_correlator(a: f64, b: f64, n: usize, plan: SamplingPlan) -> Result<CorrelatorEstimate> {
    let psi = singlet_state()?;
    let ctx = pair_context(a, b)?;
    let states = sample_context(&psi, &ctx, n, plan, 0..n as u64)?;
    correlator_from_states(a, b, &psi, &states)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshAngles {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl ChshAngles {
    /// `a = 0, a' = pi/2, b = pi/4, b' = 3pi/4`.
    pub fn canonical() -> Self {
        Self {
            a: 0.0,
            a_prime: FRAC_PI_2,
            b: FRAC_PI_4,
            b_prime: 3.0 * FRAC_PI_4,
        }
    }

    fn settings(&self) -> [(&'static str, f64, f64); 4] {
        [
            ("E(a,b)", self.a, self.b),
            ("E(a,b')", self.a, self.b_prime),
            ("E(a',b)", self.a_prime, self.b),
            ("E(a',b')", self.a_prime, self.b_prime),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub angles: ChshAngles,
    pub n_per_setting: usize,
    pub seed: u64,
    pub partitions: usize,
    pub labels: Vec<String>,
    pub correlators: Vec<CorrelatorEstimate>,
    /// `E(a,b) - E(a,b') + E(a',b) + E(a',b')`
    pub s: f64,
    pub s_target: f64,
    /// `3 sqrt(4 / n)`
    pub half_width: f64,
    /// No trial is shared between settings.
    pub disjoint: bool,
    pub exceeds_classical_bound: bool,
    pub passed: bool,
}

/// Four independent relevant sets, one per setting pair.
pub fn run_chsh(angles: ChshAngles, n: usize, plan: SamplingPlan) -> Result<ChshResult> {
    if n < MIN_CHSH_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n,
            min: MIN_CHSH_SAMPLES,
        });
    }
    if ![angles.a, angles.a_prime, angles.b, angles.b_prime]
        .iter()
        .all(|x| x.is_finite())
    {
        return Err(Error::Model("CHSH angles must be finite".into()));
    }
    let psi = singlet_state()?;
    let counter = TrialCounter::default();
    let settings = angles.settings();
    let blocks: Vec<_> = settings.iter().map(|_| counter.reserve(n)).collect();
    let runs: Vec<(Vec<PhysicalState>, CorrelatorEstimate)> = settings
        .par_iter()
        .zip(blocks)
        .enumerate()
        .map(|(k, ((_, a, b), ids))| {
            let ctx = pair_context(*a, *b)?;
            let states = sample_context(&psi, &ctx, n, plan.substream(k as u64), ids)?;
            let est = correlator_from_states(*a, *b, &psi, &states)?;
            Ok((states, est))
        })
        .collect::<Result<_>>()?;

    let mut seen: HashSet<u64> = HashSet::with_capacity(4 * n);
    let mut disjoint = true;
    for (states, _) in &runs {
        for s in states {
            disjoint &= seen.insert(s.trial_id());
        }
    }
    let e: Vec<&CorrelatorEstimate> = runs.iter().map(|(_, est)| est).collect();
    let s = e[0].empirical - e[1].empirical + e[2].empirical + e[3].empirical;
    let s_target = e[0].target - e[1].target + e[2].target + e[3].target;
    let half_width = 3.0 * (4.0 / n as f64).sqrt();
    let exceeds = s.abs() > 2.0;
    Ok(ChshResult {
        angles,
        n_per_setting: n,
        seed: plan.seed,
        partitions: plan.partitions,
        labels: settings.iter().map(|(l, _, _)| l.to_string()).collect(),
        correlators: runs.into_iter().map(|(_, est)| est).collect(),
        s,
        s_target,
        half_width,
        disjoint,
        exceeds_classical_bound: exceeds,
        passed: disjoint && (s - s_target).abs() <= half_width,
    })
}

/// Maximal quantum CHSH value `2 sqrt 2`.
pub const TSIRELSON_BOUND: f64 = 2.0 * SQRT_2;

/// Truncated harmonic oscillator on `levels` number states.
#[derive(Clone, Debug)]
pub struct OscillatorModel {
    pub levels: usize,
    pub lowering: AlgebraElement,
    pub number: Observable,
    pub position: Observable,
    pub momentum: Observable,
    pub hamiltonian: Observable,
}

pub fn build_oscillator_model(levels: usize) -> Result<OscillatorModel> {
    if levels < 2 {
        return Err(Error::InvalidDimension(levels));
    }
    let mut a = CMatrix::zeros(levels, levels);
    for k in 1..levels {
        a[(k - 1, k)] = c((k as f64).sqrt(), 0.0);
    }
    let adag = a.adjoint();
    let h = 1.0 / SQRT_2;
    let position = Observable::from_matrix((&a + &adag) * c(h, 0.0))?;
    let momentum = Observable::from_matrix((&adag - &a) * c(0.0, h))?;
    let number = Observable::diagonal(&(0..levels).map(|k| k as f64).collect::<Vec<_>>())?;
    let unity = make_unity(levels)?;
    let hamiltonian = Observable::new(number.add(&unity.scale(c(0.5, 0.0)))?)?;
    Ok(OscillatorModel {
        levels,
        lowering: AlgebraElement::from_matrix(a)?,
        number,
        position,
        momentum,
        hamiltonian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{commutator, spectrum};
    use crate::context::context_of;
    use crate::ensemble::{born_measure, born_measure_in, quantum_state};

    #[test]
    fn swap_exchanges_factors() {
        let swap = AlgebraElement::from_matrix(swap_matrix()).unwrap();
        let za = local_spin(&pauli_z(), 0);
        let zb = local_spin(&pauli_z(), 1);
        let conj = swap.mul(&za).unwrap().mul(&swap).unwrap();
        assert!(conj.sub(&zb).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn singlet_marginal_is_half() {
        let psi = singlet_state().unwrap();
        let za = local_spin(&pauli_z(), 0);
        let m = born_measure(&psi, &za).unwrap();
        // Oracle: |<basis_i, v>|^2 summed per value.
        let ctx = context_of("za", &za).unwrap();
        let mut plus = 0.0;
        for i in 0..4 {
            let p = ctx.basis().column(i).dotc(psi.vector()).norm_sqr();
            if ctx.generators()[0].spectrum()[i] > 0.0 {
                plus += p;
            }
        }
        assert!((plus - 0.5).abs() < 1e-12);
        let dist = m.distribution();
        assert!((dist[0].1 - 0.5).abs() < 1e-12 && (dist[1].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singlet_joint_measure_has_no_parallel_outcomes() {
        let psi = singlet_state().unwrap();
        let ctx = pair_context(0.3, 0.3).unwrap();
        let product = local_spin(&spin_xz(0.3), 0).commuting_product(&local_spin(&spin_xz(0.3), 1)).unwrap();
        let m = born_measure_in(&psi, &ctx, &product).unwrap();
        let dist: Vec<_> = m.distribution().into_iter().filter(|(_, p)| *p > 0.0).collect();
        assert_eq!(dist.len(), 1);
        assert!((dist[0].0 + 1.0).abs() < 1e-12 && dist[0].1 == 1.0);
    }

    #[test]
    fn epr_is_perfectly_anticorrelated() {
        let report = run_epr_bohm(1000, SamplingPlan::new(1)).unwrap();
        assert!(report.passed);
        for axis in &report.axes {
            assert_eq!(axis.anticorrelation_frequency, 1.0);
        }
    }

    #[test]
    fn epr_marginal_within_three_sigma() {
        let report = run_epr_bohm(10_000, SamplingPlan::new(2)).unwrap();
        for axis in &report.axes {
            assert!((axis.marginal_a_plus - 0.5).abs() <= axis.marginal_bound);
        }
    }

    #[test]
    fn correlators_follow_minus_cosine() {
        let n = 20_000;
        let same = singlet_correlator(0.7, 0.7, n, SamplingPlan::new(3)).unwrap();
        // eigenvector rounding leaves each product within an ulp or two of -1
        assert!((same.empirical + 1.0).abs() < 1e-12);
        let states = sample_context(&singlet_state().unwrap(), &pair_context(0.7, 0.7).unwrap(), 2000, SamplingPlan::new(3), 0..2000).unwrap();
        assert!(pair_values(&states).iter().all(|(x, y)| (x * y + 1.0).abs() < 1e-12));
        assert!((same.target + 1.0).abs() < 1e-12);
        let perp = singlet_correlator(0.0, FRAC_PI_2, n, SamplingPlan::new(4)).unwrap();
        assert!(perp.target.abs() < 1e-12);
        assert!(perp.empirical.abs() <= 3.0 / (n as f64).sqrt());
        let diag = singlet_correlator(FRAC_PI_4, 0.0, n, SamplingPlan::new(5)).unwrap();
        assert!((diag.target + FRAC_PI_4.cos()).abs() < 1e-12);
        assert!((diag.empirical - diag.target).abs() <= 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn chsh_degenerate_settings() {
        let angles = ChshAngles {
            a: 0.2,
            a_prime: 0.2 + FRAC_PI_2,
            b: 0.2,
            b_prime: 0.2 + FRAC_PI_2,
        };
        let r = run_chsh(angles, 500, SamplingPlan::new(6)).unwrap();
        assert!((r.correlators[0].empirical + 1.0).abs() < 1e-12);
        assert!((r.correlators[3].empirical + 1.0).abs() < 1e-12);
        assert!(r.disjoint);
        assert!(run_chsh(angles, 99, SamplingPlan::new(6)).is_err());
    }

    #[test]
    fn oscillator_with_two_levels() {
        let osc = build_oscillator_model(2).unwrap();
        assert_eq!(osc.number, Observable::diagonal(&[0.0, 1.0]).unwrap());
        let s = spectrum(&osc.hamiltonian);
        assert!((s[0].value - 0.5).abs() < 1e-15 && (s[1].value - 1.5).abs() < 1e-15);
        assert!(build_oscillator_model(1).is_err());
    }

    #[test]
    fn oscillator_canonical_commutator_block() {
        for levels in [3, 5, 8] {
            let osc = build_oscillator_model(levels).unwrap();
            for obs in [&osc.position, &osc.momentum, &osc.hamiltonian] {
                assert!(obs.hermiticity_defect() <= 1e-12);
            }
            let comm = commutator(&osc.position, &osc.momentum).unwrap().value;
            for i in 0..levels - 1 {
                for j in 0..levels - 1 {
                    let expected = if i == j { c(0.0, 1.0) } else { c(0.0, 0.0) };
                    assert!((comm.entry(i, j) - expected).norm() <= 1e-10);
                }
            }
            let last = comm.entry(levels - 1, levels - 1);
            assert!((last - c(0.0, 1.0)).norm() > 1.0, "truncation edge at {last}");
        }
    }

    #[test]
    fn oscillator_ground_state_moments() {
        let osc = build_oscillator_model(6).unwrap();
        let ctx = context_of("N", &osc.number).unwrap();
        let ground = quantum_state(&ctx, 0).unwrap();
        assert_eq!(ground.label()[0].1, 0.0);
        assert!(ground.expectation_real(&osc.position).unwrap().abs() < 1e-15);
        let x2 = osc.position.square();
        assert!((ground.expectation_real(&x2).unwrap() - 0.5).abs() < 1e-14);
    }
}
