//! Measurement contexts: maximal commutative subalgebras of `M_n`.
//!
//! A context is stored as a joint orthonormal eigenbasis plus the named
//! generators that are diagonal in it. Characters (multiplicative
//! functionals) of a context are evaluations at one basis column.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    c, cluster_values, commutator, eigh, spectrum, AlgebraElement, CMatrix, CVector, ComplexRows,
    Observable, SpectralPoint, CLUSTER_TOL,
};
use crate::error::{Error, Result};
use crate::physical_state::{fingerprint, Fingerprint};

/// Seed of the random linear combination used for joint diagonalization.
pub const JOINT_DIAGONALIZATION_SEED: u64 = 0x6a09_e667_f3bc_c908;
/// Off-diagonal tolerance for membership and generator diagonality.
pub const CONTAINMENT_TOL: f64 = 1e-8;

const UNITARITY_TOL: f64 = 1e-10;
// Minimum residual norm for a projected unit vector to be kept during
// Gram-Schmidt canonicalization of an eigenspace.
const PIVOT_TOL: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct Generator {
    name: String,
    observable: Observable,
    spectrum: Vec<f64>,
    fingerprint: Fingerprint,
}

impl Generator {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    /// Eigenvalue on each basis column, in column order.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }
}

#[derive(Debug)]
pub struct MeasurementContext {
    label: String,
    basis: CMatrix,
    generators: Vec<Generator>,
}

impl MeasurementContext {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Unitary whose columns are the joint eigenbasis.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn column(&self, index: usize) -> CVector {
        self.basis.column(index).into_owned()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn generator(&self, name: &str) -> Option<&Generator> {
        self.generators.iter().find(|g| g.name == name)
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.name == name)
    }

    /// Generator values at one basis column.
    pub fn generator_values(&self, index: usize) -> Vec<(String, f64)> {
        self.generators
            .iter()
            .map(|g| (g.name.clone(), g.spectrum[index]))
            .collect()
    }

    /// `basis^dagger A basis`.
    pub fn transform(&self, a: &AlgebraElement) -> CMatrix {
        self.basis.adjoint() * a.matrix() * &self.basis
    }

    fn off_diagonal_norm(m: &CMatrix) -> f64 {
        let mut sum = 0.0;
        for col in 0..m.ncols() {
            for row in 0..m.nrows() {
                if row != col {
                    sum += m[(row, col)].norm_sqr();
                }
            }
        }
        sum.sqrt()
    }

    /// True when `a` is diagonal in the context basis.
    pub fn contains(&self, a: &AlgebraElement) -> bool {
        a.dim() == self.dim() && Self::off_diagonal_norm(&self.transform(a)) <= CONTAINMENT_TOL
    }

    /// Diagonal of `basis^dagger A basis` (real parts) after a membership check.
    pub fn diagonal_values(&self, a: &AlgebraElement) -> Result<Vec<f64>> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: a.dim(),
            });
        }
        let m = self.transform(a);
        if Self::off_diagonal_norm(&m) > CONTAINMENT_TOL {
            return Err(Error::NotInContext {
                context: self.label.clone(),
            });
        }
        Ok((0..m.nrows()).map(|k| m[(k, k)].re).collect())
    }

    /// Clustered spectrum of `a` computed inside the context. Agrees with the
    /// spectrum in the full algebra; a disagreement is a numerical failure.
    pub fn spectrum_in_context(&self, a: &Observable) -> Result<Vec<SpectralPoint>> {
        let mut values = self.diagonal_values(a)?;
        values.sort_by(f64::total_cmp);
        let local = cluster_values(&values);
        let global = spectrum(a);
        let defect = spectrum_defect(&local, &global);
        if defect > CLUSTER_TOL {
            return Err(Error::NumericalFailure {
                what: format!("context spectrum disagrees with algebra spectrum in `{}`", self.label),
                value: defect,
            });
        }
        Ok(local)
    }

    pub fn dump(&self) -> ContextDump {
        ContextDump {
            dim: self.dim(),
            label: self.label.clone(),
            basis: ComplexRows::from_matrix(&self.basis),
            generators: self
                .generators
                .iter()
                .map(|g| GeneratorDump {
                    name: g.name.clone(),
                    spectrum: g.spectrum.clone(),
                })
                .collect(),
        }
    }
}

/// Largest distance between matched spectral points, or infinity when the
/// point counts or multiplicities differ.
pub fn spectrum_defect(a: &[SpectralPoint], b: &[SpectralPoint]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            if p.multiplicity != q.multiplicity {
                f64::INFINITY
            } else {
                (p.value - q.value).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Builds the maximal commutative subalgebra generated by a commuting family.
///
/// The family is jointly diagonalized through a seeded random combination,
/// refined per joint eigenspace. Each eigenspace gets the canonical basis
/// obtained by Gram-Schmidt on the projected standard basis vectors.
/// Eigenspaces of dimension `k > 1` are split by appending rank-one
/// projectors onto their first `k - 1` canonical vectors.
pub fn context_from(generating_set: Vec<(String, Observable)>) -> Result<Arc<MeasurementContext>> {
    let Some((_, first)) = generating_set.first() else {
        return Err(Error::EmptyGeneratingSet);
    };
    let n = first.dim();
    for (name, g) in &generating_set {
        if g.dim() != n {
            return Err(Error::Model(format!(
                "generator `{name}` has dimension {} but context dimension is {n}",
                g.dim()
            )));
        }
    }
    for (i, (name_a, a)) in generating_set.iter().enumerate() {
        for (name_b, b) in &generating_set[i + 1..] {
            let comm = commutator(a, b)?;
            if !comm.compatible {
                return Err(Error::IncompatibleGenerators {
                    first: name_a.clone(),
                    second: name_b.clone(),
                    defect: comm.defect,
                });
            }
        }
    }

    let matrices: Vec<&CMatrix> = generating_set.iter().map(|(_, g)| g.matrix()).collect();
    let spaces = joint_eigenspaces(&matrices, n);

    // (pivot, eigenspace position, vector)
    let mut columns: Vec<(usize, usize, CVector)> = Vec::with_capacity(n);
    let mut completion: Vec<(usize, usize)> = Vec::new();
    for (space_idx, space) in spaces.iter().enumerate() {
        let canonical = canonical_basis(space);
        let k = canonical.len();
        for (j, (pivot, v)) in canonical.into_iter().enumerate() {
            if j + 1 < k {
                completion.push((space_idx, pivot));
            }
            columns.push((pivot, space_idx, v));
        }
    }

    let values_at = |v: &CVector| -> Vec<f64> {
        matrices
            .iter()
            .map(|g| (v.adjoint() * *g * v)[(0, 0)].re)
            .collect()
    };
    let mut keyed: Vec<(usize, Vec<f64>, usize, CVector)> = columns
        .into_iter()
        .map(|(pivot, space, v)| (pivot, values_at(&v), space, v))
        .collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| {
                a.1.iter()
                    .zip(&b.1)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| a.2.cmp(&b.2))
    });

    let mut basis = CMatrix::zeros(n, n);
    for (col, (_, _, _, v)) in keyed.iter().enumerate() {
        basis.set_column(col, v);
    }

    let mut named: Vec<(String, Observable)> = generating_set;
    for (col, (pivot, _, space, v)) in keyed.iter().enumerate() {
        if completion.contains(&(*space, *pivot)) {
            let projector = v * v.adjoint();
            named.push((format!("proj[{col}]"), Observable::symmetrized(projector)));
        }
    }

    let label = named
        .iter()
        .filter(|(name, _)| !name.starts_with("proj["))
        .map(|(name, _)| name.as_str())
        .collect::<Vec<_>>()
        .join(",");
    build_checked(label, basis, named)
}

fn build_checked(
    label: String,
    basis: CMatrix,
    named: Vec<(String, Observable)>,
) -> Result<Arc<MeasurementContext>> {
    let n = basis.nrows();
    let unitarity = (basis.adjoint() * &basis - CMatrix::identity(n, n)).norm();
    if unitarity > UNITARITY_TOL {
        return Err(Error::NumericalFailure {
            what: "joint eigenbasis is not unitary".into(),
            value: unitarity,
        });
    }
    let mut generators = Vec::with_capacity(named.len());
    for (name, observable) in named {
        let m = basis.adjoint() * observable.matrix() * &basis;
        let off = MeasurementContext::off_diagonal_norm(&m);
        if off > CONTAINMENT_TOL {
            return Err(Error::NumericalFailure {
                what: format!("generator `{name}` is not diagonal in the joint eigenbasis"),
                value: off,
            });
        }
        let spectrum = (0..n).map(|k| m[(k, k)].re).collect();
        generators.push(Generator {
            fingerprint: fingerprint(&observable),
            name,
            observable,
            spectrum,
        });
    }
    Ok(Arc::new(MeasurementContext {
        label,
        basis,
        generators,
    }))
}

/// Context generated by a single observable.
pub fn context_of(name: impl Into<String>, a: &Observable) -> Result<Arc<MeasurementContext>> {
    context_from(vec![(name.into(), a.clone())])
}

/// Context of `B(alpha) = A1 cos(alpha) + A2 sin(alpha)`.
pub fn rotated_context(a1: &Observable, a2: &Observable, alpha: f64) -> Result<Arc<MeasurementContext>> {
    let b = a1.combine(alpha.cos(), a2, alpha.sin())?;
    context_of(format!("B({alpha})"), &b)
}

fn cluster_ranges(sorted: &[f64]) -> Vec<Range<usize>> {
    let mut ranges: Vec<Range<usize>> = Vec::new();
    for (k, v) in sorted.iter().enumerate() {
        match ranges.last_mut() {
            Some(r) if v - sorted[k - 1] <= CLUSTER_TOL => r.end = k + 1,
            _ => ranges.push(k..k + 1),
        }
    }
    ranges
}

fn joint_eigenspaces(generators: &[&CMatrix], n: usize) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(JOINT_DIAGONALIZATION_SEED);
    let mut combo = CMatrix::zeros(n, n);
    for g in generators {
        let weight: f64 = rng.random_range(0.5..1.5);
        let scale = g.norm();
        if scale > 0.0 {
            combo += *g * c(weight / scale, 0.0);
        }
    }
    let combo = (&combo + combo.adjoint()) * c(0.5, 0.0);
    let (values, vectors) = eigh(&combo);
    let mut spaces = Vec::new();
    for range in cluster_ranges(&values) {
        let sub = vectors.columns(range.start, range.len()).into_owned();
        refine(sub, generators, &mut spaces);
    }
    spaces
}

fn refine(sub: CMatrix, generators: &[&CMatrix], out: &mut Vec<CMatrix>) {
    if sub.ncols() == 1 {
        out.push(sub);
        return;
    }
    for g in generators {
        let m = sub.adjoint() * *g * &sub;
        let m = (&m + m.adjoint()) * c(0.5, 0.0);
        let (values, w) = eigh(&m);
        let ranges = cluster_ranges(&values);
        if ranges.len() > 1 {
            let rotated = &sub * w;
            for range in ranges {
                refine(rotated.columns(range.start, range.len()).into_owned(), generators, out);
            }
            return;
        }
    }
    out.push(sub);
}

/// Orthonormal basis of span(space) from Gram-Schmidt on the projections of
/// `e_0, e_1, ...`, each tagged with the index of the standard vector it came
/// from. The pivot component of every returned vector is real and positive.
fn canonical_basis(space: &CMatrix) -> Vec<(usize, CVector)> {
    let (n, k) = space.shape();
    let projector = space * space.adjoint();
    let mut out: Vec<(usize, CVector)> = Vec::with_capacity(k);
    for pivot in 0..n {
        if out.len() == k {
            break;
        }
        let mut v: CVector = projector.column(pivot).into_owned();
        for (_, u) in &out {
            let overlap = u.dotc(&v);
            v -= u * overlap;
        }
        // second pass for stability
        for (_, u) in &out {
            let overlap = u.dotc(&v);
            v -= u * overlap;
        }
        let norm = v.norm();
        if norm > PIVOT_TOL {
            let mut v = v / c(norm, 0.0);
            let p = v[pivot];
            if p.norm() > 0.0 {
                v *= p.conj() / p.norm();
            }
            out.push((pivot, v));
        }
    }
    out
}

/// A multiplicative functional on one context: evaluation at a basis column.
#[derive(Clone)]
pub struct Character {
    context: Arc<MeasurementContext>,
    index: usize,
}

impl Character {
    pub fn new(context: &Arc<MeasurementContext>, index: usize) -> Result<Self> {
        if index >= context.dim() {
            return Err(Error::IndexOutOfRange {
                index,
                dim: context.dim(),
            });
        }
        Ok(Self {
            context: Arc::clone(context),
            index,
        })
    }

    pub fn context(&self) -> &Arc<MeasurementContext> {
        &self.context
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn belongs_to(&self, ctx: &Arc<MeasurementContext>) -> bool {
        Arc::ptr_eq(&self.context, ctx)
    }

    /// Value of the `k`-th generator.
    pub fn generator_value(&self, k: usize) -> f64 {
        self.context.generators[k].spectrum[self.index]
    }

    pub fn generator_values(&self) -> Vec<(String, f64)> {
        self.context.generator_values(self.index)
    }

    /// `phi(A)` for `A` in the context.
    pub fn evaluate(&self, a: &AlgebraElement) -> Result<f64> {
        if a.dim() != self.context.dim() {
            return Err(Error::DimensionMismatch {
                left: self.context.dim(),
                right: a.dim(),
            });
        }
        if !self.context.contains(a) {
            return Err(Error::NotInContext {
                context: self.context.label.clone(),
            });
        }
        let v = self.context.basis.column(self.index);
        Ok((v.adjoint() * a.matrix() * v)[(0, 0)].re)
    }
}

impl PartialEq for Character {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.context, &other.context) && self.index == other.index
    }
}

impl fmt::Debug for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Character")
            .field("context", &self.context.label)
            .field("index", &self.index)
            .finish()
    }
}

/// One character per basis column.
pub fn characters_of(ctx: &Arc<MeasurementContext>) -> Vec<Character> {
    (0..ctx.dim())
        .map(|index| Character {
            context: Arc::clone(ctx),
            index,
        })
        .collect()
}

pub fn evaluate(chi: &Character, a: &Observable) -> Result<f64> {
    chi.evaluate(a)
}

pub fn contains(ctx: &MeasurementContext, a: &AlgebraElement) -> bool {
    ctx.contains(a)
}

pub fn spectrum_in_context(ctx: &MeasurementContext, a: &Observable) -> Result<Vec<SpectralPoint>> {
    ctx.spectrum_in_context(a)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorDump {
    pub name: String,
    pub spectrum: Vec<f64>,
}

/// JSON form of a context: basis, generator names and per-column spectra.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContextDump {
    pub dim: usize,
    pub label: String,
    pub basis: ComplexRows,
    pub generators: Vec<GeneratorDump>,
}
