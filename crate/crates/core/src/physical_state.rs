//! Physical states: trial-local valuation functionals.
//!
//! A state is born in one context (its home character) and may be extended
//! into further contexts one at a time. Values exist only on contexts the
//! state has visited; on each of them the state is a character, so it is
//! linear and multiplicative there while being nonlinear across contexts.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{commutator, AlgebraElement, Observable, CLUSTER_TOL};
use crate::context::{characters_of, context_from, context_of, Character, MeasurementContext};
use crate::ensemble::QuantumState;
use crate::error::{Error, Result};

pub type Fingerprint = u64;

const FINGERPRINT_GRID: f64 = 1e9;
const SEPARATION_TOL: f64 = 1e-8;
const WITNESS_GAP: f64 = 1e-9;

/// Hash of the matrix entries rounded to a `1e-9` grid.
pub fn fingerprint(a: &AlgebraElement) -> Fingerprint {
    let mut hasher = DefaultHasher::new();
    a.dim().hash(&mut hasher);
    for z in a.matrix().iter() {
        // the integer cast maps -0.0 and 0.0 alike
        ((z.re * FINGERPRINT_GRID).round() as i64).hash(&mut hasher);
        ((z.im * FINGERPRINT_GRID).round() as i64).hash(&mut hasher);
    }
    hasher.finish()
}

/// Monotone source of trial identifiers.
#[derive(Debug)]
pub struct TrialCounter {
    next: AtomicU64,
}

static GLOBAL_TRIALS: TrialCounter = TrialCounter::starting_at(0);

impl TrialCounter {
    pub const fn starting_at(first: u64) -> Self {
        Self {
            next: AtomicU64::new(first),
        }
    }

    /// Process-wide counter.
    pub fn global() -> &'static TrialCounter {
        &GLOBAL_TRIALS
    }

    pub fn next_id(&self) -> u64 {
        self.next.fetch_add(1, Ordering::Relaxed)
    }

    /// Reserves `n` consecutive identifiers.
    pub fn reserve(&self, n: usize) -> Range<u64> {
        let start = self.next.fetch_add(n as u64, Ordering::Relaxed);
        start..start + n as u64
    }
}

impl Default for TrialCounter {
    fn default() -> Self {
        Self::starting_at(0)
    }
}

#[derive(Clone, Debug)]
pub struct PhysicalState {
    trial_id: u64,
    chain: Vec<Character>,
    record: BTreeMap<Fingerprint, f64>,
    ensemble: Option<Arc<QuantumState>>,
}

/// Generator values of one visited context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartEntry {
    pub context: String,
    pub coordinates: Vec<ChartCoordinate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartCoordinate {
    pub generator: String,
    pub fingerprint: Fingerprint,
    pub value: f64,
}

/// Coordinates of a state along its chain of contexts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateChart {
    pub entries: Vec<ChartEntry>,
}

impl CoordinateChart {
    /// Every generator appearing in several contexts carries one value.
    pub fn is_overlap_consistent(&self) -> bool {
        let mut seen: BTreeMap<Fingerprint, f64> = BTreeMap::new();
        for coord in self.entries.iter().flat_map(|e| &e.coordinates) {
            if let Some(prev) = seen.insert(coord.fingerprint, coord.value) {
                if (prev - coord.value).abs() > CLUSTER_TOL {
                    return false;
                }
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(|e| e.coordinates.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A fresh state whose home values are those of `chi`.
pub fn realize_state(
    ctx: &Arc<MeasurementContext>,
    chi: &Character,
    trial_id: u64,
) -> Result<PhysicalState> {
    if !chi.belongs_to(ctx) {
        return Err(Error::CharacterMismatch {
            context: ctx.label().to_string(),
        });
    }
    Ok(PhysicalState::seeded(chi.clone(), trial_id, None))
}

impl PhysicalState {
    pub(crate) fn seeded(home: Character, trial_id: u64, ensemble: Option<Arc<QuantumState>>) -> Self {
        let mut record = BTreeMap::new();
        for (k, g) in home.context().generators().iter().enumerate() {
            record.insert(g.fingerprint(), home.generator_value(k));
        }
        Self {
            trial_id,
            chain: vec![home],
            record,
            ensemble,
        }
    }

    pub fn trial_id(&self) -> u64 {
        self.trial_id
    }

    pub fn home_character(&self) -> &Character {
        &self.chain[0]
    }

    pub fn home_context(&self) -> &Arc<MeasurementContext> {
        self.chain[0].context()
    }

    /// Visited contexts with the character chosen in each, home first.
    pub fn chain(&self) -> &[Character] {
        &self.chain
    }

    pub fn coordinate_record(&self) -> &BTreeMap<Fingerprint, f64> {
        &self.record
    }

    pub fn ensemble(&self) -> Option<&Arc<QuantumState>> {
        self.ensemble.as_ref()
    }

    /// `phi(A)`, read from the earliest visited context containing `A`, or
    /// from the coordinate record.
    pub fn value(&self, a: &AlgebraElement) -> Result<f64> {
        for chi in &self.chain {
            if chi.context().contains(a) {
                return chi.evaluate(a);
            }
        }
        if let Some(v) = self.record.get(&fingerprint(a)) {
            return Ok(*v);
        }
        Err(Error::NotInContext {
            context: self
                .chain
                .iter()
                .map(|chi| chi.context().label())
                .collect::<Vec<_>>()
                .join(" -> "),
        })
    }

    /// Value of a named generator of one of the visited contexts.
    pub fn generator_value(&self, name: &str) -> Option<f64> {
        self.chain.iter().find_map(|chi| {
            chi.context()
                .generator_index(name)
                .map(|k| chi.generator_value(k))
        })
    }

    pub fn chart(&self) -> CoordinateChart {
        CoordinateChart {
            entries: self
                .chain
                .iter()
                .map(|chi| ChartEntry {
                    context: chi.context().label().to_string(),
                    coordinates: chi
                        .context()
                        .generators()
                        .iter()
                        .enumerate()
                        .map(|(k, g)| ChartCoordinate {
                            generator: g.name().to_string(),
                            fingerprint: g.fingerprint(),
                            value: chi.generator_value(k),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Characters of `next` that agree with every recorded generator that
    /// lies in `next`.
    pub fn admissible_characters(&self, next: &Arc<MeasurementContext>) -> Result<Vec<Character>> {
        if next.dim() != self.home_context().dim() {
            return Err(Error::DimensionMismatch {
                left: self.home_context().dim(),
                right: next.dim(),
            });
        }
        let mut constraints: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut checked: Vec<Fingerprint> = Vec::new();
        for chi in &self.chain {
            for (k, g) in chi.context().generators().iter().enumerate() {
                if checked.contains(&g.fingerprint()) {
                    continue;
                }
                checked.push(g.fingerprint());
                if let Ok(diag) = next.diagonal_values(g.observable()) {
                    constraints.push((diag, chi.generator_value(k)));
                }
            }
        }
        Ok(characters_of(next)
            .into_iter()
            .filter(|cand| {
                constraints
                    .iter()
                    .all(|(diag, v)| (diag[cand.index()] - v).abs() <= CLUSTER_TOL)
            })
            .collect())
    }

    /// Extends the state into `next` with an explicitly chosen character.
    pub fn extend_with(&self, chi: &Character) -> Result<PhysicalState> {
        if let Some(existing) = self.chain.iter().find(|c| Arc::ptr_eq(c.context(), chi.context())) {
            if existing.index() == chi.index() {
                return Ok(self.clone());
            }
            return Err(Error::InconsistentExtension {
                context: chi.context().label().to_string(),
            });
        }
        let admissible = self.admissible_characters(chi.context())?;
        if !admissible.iter().any(|a| a == chi) {
            return Err(Error::InconsistentExtension {
                context: chi.context().label().to_string(),
            });
        }
        Ok(self.appended(chi.clone()))
    }

    fn appended(&self, chi: Character) -> PhysicalState {
        let mut next = self.clone();
        for (k, g) in chi.context().generators().iter().enumerate() {
            next.record.entry(g.fingerprint()).or_insert(chi.generator_value(k));
        }
        next.chain.push(chi);
        next
    }

    /// Extends the coordinate record into `next`.
    ///
    /// Recorded generators lying in `next` keep their values. The new
    /// character is drawn among the admissible ones, weighted by the Born
    /// probabilities of the ensemble the state was drawn from, or uniformly
    /// when no ensemble is attached or all admissible weights vanish.
    pub fn extend_coordinates<R: Rng + ?Sized>(
        &self,
        next: &Arc<MeasurementContext>,
        rng: &mut R,
    ) -> Result<PhysicalState> {
        if self.chain.iter().any(|c| Arc::ptr_eq(c.context(), next)) {
            return Ok(self.clone());
        }
        let admissible = self.admissible_characters(next)?;
        if admissible.is_empty() {
            return Err(Error::InconsistentExtension {
                context: next.label().to_string(),
            });
        }
        let mut weights: Vec<f64> = match &self.ensemble {
            Some(psi) => {
                let v = psi.vector();
                admissible
                    .iter()
                    .map(|chi| next.basis().column(chi.index()).dotc(v).norm_sqr())
                    .collect()
            }
            None => vec![1.0; admissible.len()],
        };
        let total: f64 = weights.iter().sum();
        if total <= 1e-14 {
            weights = vec![1.0; admissible.len()];
        }
        let total: f64 = weights.iter().sum();
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = admissible.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            if *w > 0.0 && u < acc {
                pick = k;
                break;
            }
        }
        Ok(self.appended(admissible[pick].clone()))
    }
}

pub fn extend_coordinates<R: Rng + ?Sized>(
    phi: &PhysicalState,
    next: &Arc<MeasurementContext>,
    rng: &mut R,
) -> Result<PhysicalState> {
    phi.extend_coordinates(next, rng)
}

/// Outcome of the observable-separation search.
#[derive(Clone, Debug)]
pub enum Separation {
    /// The two observables coincide.
    Equal,
    /// A state on which the observables take different values.
    Witness {
        state: PhysicalState,
        first: f64,
        second: f64,
    },
}

/// Finds a physical state telling `a1` and `a2` apart.
///
/// Commuting pairs are separated by a character of a context holding both:
/// a pool context if one fits, else the context they generate. A
/// noncommuting pair is separated by a state visiting the context of `a1`
/// and then the context of `a2`.
pub fn separate(
    a1: &Observable,
    a2: &Observable,
    context_pool: &[Arc<MeasurementContext>],
) -> Result<Separation> {
    let diff = a1.sub(a2)?.frobenius_norm();
    if diff <= SEPARATION_TOL {
        return Ok(Separation::Equal);
    }
    let counter = TrialCounter::global();
    let witness_in = |ctx: &Arc<MeasurementContext>| -> Result<Option<Separation>> {
        for chi in characters_of(ctx) {
            let (v1, v2) = (chi.evaluate(a1)?, chi.evaluate(a2)?);
            if (v1 - v2).abs() > WITNESS_GAP {
                return Ok(Some(Separation::Witness {
                    state: realize_state(ctx, &chi, counter.next_id())?,
                    first: v1,
                    second: v2,
                }));
            }
        }
        Ok(None)
    };

    for ctx in context_pool {
        if ctx.contains(a1) && ctx.contains(a2) {
            if let Some(w) = witness_in(ctx)? {
                return Ok(w);
            }
        }
    }

    if commutator(a1, a2)?.compatible {
        let joint = context_from(vec![("A1".into(), a1.clone()), ("A2".into(), a2.clone())])?;
        if let Some(w) = witness_in(&joint)? {
            return Ok(w);
        }
    } else {
        let pick = |a: &Observable, name: &str| -> Result<Arc<MeasurementContext>> {
            match context_pool.iter().find(|c| c.contains(a)) {
                Some(c) => Ok(Arc::clone(c)),
                None => context_of(name, a),
            }
        };
        let first_ctx = pick(a1, "A1")?;
        let second_ctx = pick(a2, "A2")?;
        for chi in characters_of(&first_ctx) {
            let home = PhysicalState::seeded(chi.clone(), 0, None);
            let v1 = chi.evaluate(a1)?;
            for cand in home.admissible_characters(&second_ctx)? {
                let v2 = cand.evaluate(a2)?;
                if (v1 - v2).abs() > WITNESS_GAP {
                    let mut state = home.extend_with(&cand)?;
                    state.trial_id = counter.next_id();
                    return Ok(Separation::Witness {
                        state,
                        first: v1,
                        second: v2,
                    });
                }
            }
        }
    }
    Err(Error::NumericalFailure {
        what: "no separating state found for distinct observables".into(),
        value: diff,
    })
}

#[derive(Debug, Serialize)]
struct TrialLogRow<'a> {
    trial_id: u64,
    context: &'a str,
    generator: &'a str,
    value: f64,
}

/// Writes `trial_id,context,generator,value` rows for every visited context.
pub fn write_trial_log<W: Write>(states: &[PhysicalState], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for state in states {
        for chi in &state.chain {
            for (k, g) in chi.context().generators().iter().enumerate() {
                writer.serialize(TrialLogRow {
                    trial_id: state.trial_id,
                    context: chi.context().label(),
                    generator: g.name(),
                    value: chi.generator_value(k),
                })?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}
