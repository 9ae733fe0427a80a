//! Quantum states as ensembles of physical states.
//!
//! A quantum state fixes the values of every generator of one context; in
//! `M_n` that selects a single joint eigenvector. Its expectation functional
//! is linear, and its Born measure on any other context drives sampling of
//! relevant sets.

use std::io::Write;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{cluster_values, AlgebraElement, CVector, Observable, CLUSTER_TOL};
use crate::context::{context_of, Character, MeasurementContext};
use crate::error::{Error, Result};
use crate::physical_state::{PhysicalState, TrialCounter};

/// Born weights below this are rounding noise and are set to zero.
pub const PROBABILITY_FLOOR: f64 = 1e-14;
/// Slack added to event thresholds.
pub const EVENT_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct QuantumState {
    context: Arc<MeasurementContext>,
    index: usize,
    label: Vec<(String, f64)>,
    vector: CVector,
}

/// The quantum state selected by one character of `ctx`.
pub fn quantum_state(ctx: &Arc<MeasurementContext>, char_index: usize) -> Result<QuantumState> {
    if char_index >= ctx.dim() {
        return Err(Error::IndexOutOfRange {
            index: char_index,
            dim: ctx.dim(),
        });
    }
    Ok(QuantumState {
        context: Arc::clone(ctx),
        index: char_index,
        label: ctx.generator_values(char_index),
        vector: ctx.column(char_index),
    })
}

impl QuantumState {
    /// Selects the basis column whose generator values match `label`.
    /// Generators missing from `label` are unconstrained.
    pub fn from_label(ctx: &Arc<MeasurementContext>, label: &[(&str, f64)]) -> Result<Self> {
        let mut constraints = Vec::with_capacity(label.len());
        for (name, value) in label {
            let k = ctx.generator_index(name).ok_or_else(|| Error::UnknownName {
                kind: "generator",
                name: name.to_string(),
            })?;
            constraints.push((k, *value));
        }
        let matches: Vec<usize> = (0..ctx.dim())
            .filter(|&i| {
                constraints
                    .iter()
                    .all(|&(k, v)| (ctx.generators()[k].spectrum()[i] - v).abs() <= CLUSTER_TOL)
            })
            .collect();
        match matches.as_slice() {
            [i] => quantum_state(ctx, *i),
            _ => Err(Error::AmbiguousLabel {
                context: ctx.label().to_string(),
                matches: matches.len(),
            }),
        }
    }

    pub fn context(&self) -> &Arc<MeasurementContext> {
        &self.context
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn label(&self) -> &[(String, f64)] {
        &self.label
    }

    pub fn vector(&self) -> &CVector {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// `Psi(R) = v^dagger R v`.
    pub fn expectation(&self, r: &AlgebraElement) -> Result<Complex64> {
        if r.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: r.dim(),
            });
        }
        Ok(self.vector.dotc(&(r.matrix() * &self.vector)))
    }

    pub fn expectation_real(&self, a: &Observable) -> Result<f64> {
        Ok(self.expectation(a)?.re)
    }
}

pub fn expectation(psi: &QuantumState, r: &AlgebraElement) -> Result<Complex64> {
    psi.expectation(r)
}

/// Born probabilities `|<b_i, v>|^2` of the characters of `ctx`.
pub fn character_probabilities(psi: &QuantumState, ctx: &MeasurementContext) -> Result<Vec<f64>> {
    if ctx.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            left: psi.dim(),
            right: ctx.dim(),
        });
    }
    let mut probs: Vec<f64> = (0..ctx.dim())
        .map(|i| {
            let p = ctx.basis().column(i).dotc(psi.vector()).norm_sqr();
            if p < PROBABILITY_FLOOR {
                0.0
            } else {
                p
            }
        })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub character: usize,
    pub value: f64,
    pub probability: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub cumulative: f64,
}

/// Distribution of one observable's values under a quantum state.
#[derive(Clone, Debug)]
pub struct SpectralMeasure {
    context: Arc<MeasurementContext>,
    outcomes: Vec<Outcome>,
    cdf: Vec<CdfPoint>,
}

impl SpectralMeasure {
    pub fn context(&self) -> &Arc<MeasurementContext> {
        &self.context
    }

    /// Per-character outcomes, ascending by value, ties by character index.
    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    /// Cumulative probabilities at each clustered value.
    pub fn cdf(&self) -> &[CdfPoint] {
        &self.cdf
    }

    /// Probability of each clustered value.
    pub fn distribution(&self) -> Vec<(f64, f64)> {
        let mut prev = 0.0;
        self.cdf
            .iter()
            .map(|p| {
                let mass = p.cumulative - prev;
                prev = p.cumulative;
                (p.value, mass)
            })
            .collect()
    }

    pub fn expectation(&self) -> f64 {
        self.outcomes.iter().map(|o| o.value * o.probability).sum()
    }

    /// Probability of the event "measured value <= a".
    pub fn event_probability(&self, a: f64) -> f64 {
        let p: f64 = self
            .outcomes
            .iter()
            .filter(|o| o.value <= a + EVENT_SLACK)
            .map(|o| o.probability)
            .sum();
        p.min(1.0)
    }

    /// `{value: probability}` over clustered values with nonzero mass.
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .distribution()
            .into_iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(v, p)| (format!("{v}"), serde_json::json!(p)))
            .collect();
        serde_json::Value::Object(map)
    }
}

/// Born measure of `a` in `psi`, computed in `psi`'s context when it holds
/// `a` and in the context generated by `a` otherwise.
pub fn born_measure(psi: &QuantumState, a: &Observable) -> Result<SpectralMeasure> {
    if a.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            left: psi.dim(),
            right: a.dim(),
        });
    }
    let ctx = if psi.context.contains(a) {
        Arc::clone(&psi.context)
    } else {
        context_of("A", a)?
    };
    born_measure_in(psi, &ctx, a)
}

/// Born measure of `a` over the characters of a context containing it.
pub fn born_measure_in(
    psi: &QuantumState,
    ctx: &Arc<MeasurementContext>,
    a: &Observable,
) -> Result<SpectralMeasure> {
    let values = ctx.diagonal_values(a)?;
    let probs = character_probabilities(psi, ctx)?;
    let mut outcomes: Vec<Outcome> = values
        .iter()
        .zip(&probs)
        .enumerate()
        .map(|(character, (&value, &probability))| Outcome {
            character,
            value,
            probability,
        })
        .collect();
    outcomes.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.character.cmp(&b.character)));

    let sorted: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let mut cdf = Vec::new();
    let mut cumulative = 0.0;
    let mut k = 0;
    for point in cluster_values(&sorted) {
        for o in &outcomes[k..k + point.multiplicity] {
            cumulative += o.probability;
        }
        k += point.multiplicity;
        cdf.push(CdfPoint {
            value: point.value,
            cumulative: cumulative.min(1.0),
        });
    }
    if let Some(last) = cdf.last_mut() {
        last.cumulative = 1.0;
    }
    Ok(SpectralMeasure {
        context: Arc::clone(ctx),
        outcomes,
        cdf,
    })
}

pub fn event_probability(measure: &SpectralMeasure, a: f64) -> f64 {
    measure.event_probability(a)
}

/// Inverse-CDF table over characters in a fixed order.
struct CharacterLaw {
    order: Vec<usize>,
    cumulative: Vec<f64>,
}

impl CharacterLaw {
    fn new(order: Vec<usize>, probs: &[f64]) -> Self {
        let mut cumulative = Vec::with_capacity(order.len());
        let mut acc = 0.0;
        for &i in &order {
            acc += probs[i];
            cumulative.push(acc);
        }
        if let Some(last_pos) = order.iter().rposition(|&i| probs[i] > 0.0) {
            for c in &mut cumulative[last_pos..] {
                *c = 1.0;
            }
        }
        Self { order, cumulative }
    }

    fn from_measure(measure: &SpectralMeasure) -> Self {
        let n = measure.outcomes.len();
        let mut probs = vec![0.0; n];
        for o in &measure.outcomes {
            probs[o.character] = o.probability;
        }
        Self::new(measure.outcomes.iter().map(|o| o.character).collect(), &probs)
    }

    /// Characters ordered by their generator values, then by index.
    fn for_context(psi: &QuantumState, ctx: &MeasurementContext) -> Result<Self> {
        let probs = character_probabilities(psi, ctx)?;
        let mut order: Vec<usize> = (0..ctx.dim()).collect();
        order.sort_by(|&a, &b| {
            ctx.generators()
                .iter()
                .map(|g| g.spectrum()[a].total_cmp(&g.spectrum()[b]))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        Ok(Self::new(order, &probs))
    }

    fn draw(&self, u: f64) -> usize {
        let pos = self.cumulative.partition_point(|&c| c <= u);
        self.order[pos.min(self.order.len() - 1)]
    }
}

/// Seed and partition count of a sampling run. Results are a function of
/// this pair only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub seed: u64,
    pub partitions: usize,
}

impl SamplingPlan {
    pub fn new(seed: u64) -> Self {
        Self { seed, partitions: 1 }
    }

    pub fn with_partitions(self, partitions: usize) -> Self {
        Self {
            partitions: partitions.max(1),
            ..self
        }
    }

    /// Independent plan for the `k`-th sub-experiment.
    pub fn substream(&self, k: u64) -> Self {
        // splitmix64 finalizer
        let mut z = self.seed ^ (k.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        Self {
            seed: z ^ (z >> 31),
            partitions: self.partitions,
        }
    }

    fn ranges(&self, n: usize) -> Vec<Range<usize>> {
        let p = self.partitions.max(1);
        let base = n / p;
        let extra = n % p;
        let mut start = 0;
        (0..p)
            .map(|k| {
                let len = base + usize::from(k < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect()
    }
}

fn draw_states<R: Rng + ?Sized>(
    law: &CharacterLaw,
    ctx: &Arc<MeasurementContext>,
    psi: &Arc<QuantumState>,
    ids: Range<u64>,
    rng: &mut R,
) -> Vec<PhysicalState> {
    ids.map(|id| {
        let u: f64 = rng.random();
        let chi = Character::new(ctx, law.draw(u)).expect("law indexes the context");
        PhysicalState::seeded(chi, id, Some(Arc::clone(psi)))
    })
    .collect()
}

fn draw_partitioned(
    law: &CharacterLaw,
    ctx: &Arc<MeasurementContext>,
    psi: &QuantumState,
    n: usize,
    plan: SamplingPlan,
    first_id: u64,
) -> Vec<PhysicalState> {
    let psi = Arc::new(psi.clone());
    let parts: Vec<Vec<PhysicalState>> = plan
        .ranges(n)
        .into_par_iter()
        .enumerate()
        .map(|(p, r)| {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            rng.set_stream(p as u64);
            let ids = first_id + r.start as u64..first_id + r.end as u64;
            draw_states(law, ctx, &psi, ids, &mut rng)
        })
        .collect();
    parts.into_iter().flatten().collect()
}

fn relevant_context(a: &Observable) -> Result<Arc<MeasurementContext>> {
    context_of("A", a)
}

/// `n` fresh physical states in which `a` is measured, drawn by inverse CDF
/// from the Born measure of `a`. Identifiers come from the global counter.
pub fn sample_relevant_set<R: Rng + ?Sized>(
    psi: &QuantumState,
    a: &Observable,
    n: usize,
    rng: &mut R,
) -> Result<Vec<PhysicalState>> {
    sample_relevant_set_with(psi, a, n, rng, TrialCounter::global())
}

pub fn sample_relevant_set_with<R: Rng + ?Sized>(
    psi: &QuantumState,
    a: &Observable,
    n: usize,
    rng: &mut R,
    counter: &TrialCounter,
) -> Result<Vec<PhysicalState>> {
    if n == 0 {
        return Err(Error::TooFewSamples { got: 0, min: 1 });
    }
    let ctx = relevant_context(a)?;
    let measure = born_measure_in(psi, &ctx, a)?;
    let law = CharacterLaw::from_measure(&measure);
    let psi = Arc::new(psi.clone());
    Ok(draw_states(&law, &ctx, &psi, counter.reserve(n), rng))
}

/// Partitioned variant: partition `p` draws from ChaCha stream `p` of
/// `plan.seed` and owns a contiguous block of identifiers.
pub fn sample_relevant_set_partitioned(
    psi: &QuantumState,
    a: &Observable,
    n: usize,
    plan: SamplingPlan,
    counter: &TrialCounter,
) -> Result<Vec<PhysicalState>> {
    if n == 0 {
        return Err(Error::TooFewSamples { got: 0, min: 1 });
    }
    let ctx = relevant_context(a)?;
    let measure = born_measure_in(psi, &ctx, a)?;
    let law = CharacterLaw::from_measure(&measure);
    let ids = counter.reserve(n);
    Ok(draw_partitioned(&law, &ctx, psi, n, plan, ids.start))
}

/// Joint sampling of a whole context: each trial realizes one character,
/// fixing every generator at once.
pub fn sample_context(
    psi: &QuantumState,
    ctx: &Arc<MeasurementContext>,
    n: usize,
    plan: SamplingPlan,
    ids: Range<u64>,
) -> Result<Vec<PhysicalState>> {
    if n == 0 {
        return Err(Error::TooFewSamples { got: 0, min: 1 });
    }
    if ids.end - ids.start != n as u64 {
        return Err(Error::Model(format!(
            "identifier block of length {} for {n} trials",
            ids.end - ids.start
        )));
    }
    let law = CharacterLaw::for_context(psi, ctx)?;
    Ok(draw_partitioned(&law, ctx, psi, n, plan, ids.start))
}

/// `phi_i(A)` for each state.
pub fn relevant_values(states: &[PhysicalState], a: &Observable) -> Result<Vec<f64>> {
    let Some(first) = states.first() else {
        return Ok(Vec::new());
    };
    // Shared home context: evaluate once per character.
    let ctx = first.home_context();
    if states.iter().all(|s| Arc::ptr_eq(s.home_context(), ctx)) {
        if let Ok(diag) = ctx.diagonal_values(a) {
            return Ok(states.iter().map(|s| diag[s.home_character().index()]).collect());
        }
    }
    states.iter().map(|s| s.value(a)).collect()
}

#[derive(Serialize)]
struct SampleRow<'a> {
    trial_id: u64,
    observable: &'a str,
    value: f64,
}

/// Writes `trial_id,observable,value` rows.
pub fn write_sample_dump<W: Write>(
    states: &[PhysicalState],
    name: &str,
    a: &Observable,
    out: W,
) -> Result<()> {
    let values = relevant_values(states, a)?;
    let mut writer = csv::Writer::from_writer(out);
    for (s, value) in states.iter().zip(values) {
        writer.serialize(SampleRow {
            trial_id: s.trial_id(),
            observable: name,
            value,
        })?;
    }
    writer.flush()?;
    Ok(())
}
