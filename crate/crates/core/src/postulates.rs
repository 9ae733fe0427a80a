//! Randomized invariant suite over algebras `M_n` and their contexts.
//!
//! Each check records the largest defect seen across all trials together
//! with its tolerance. Boolean checks record the number of violations.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    c, commutant_dimension, make_unity, pauli_x, pauli_z, principal_sqrt, spectrum, split_hermitian,
    AlgebraElement, CMatrix, CVector, Observable, CLUSTER_TOL,
};
use crate::context::{characters_of, context_from, spectrum_defect, MeasurementContext};
use crate::error::Result;
use crate::physical_state::{realize_state, PhysicalState};
use crate::random::{random_element, random_unit_element, random_unitary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub samples: usize,
    pub max_defect: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostulateReport {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl PostulateReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    samples: usize,
    max_defect: f64,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            samples: 0,
            max_defect: 0.0,
        }
    }

    fn record(&mut self, defect: f64) {
        self.samples += 1;
        // NaN must fail the check
        if defect.is_nan() || defect > self.max_defect {
            self.max_defect = defect;
        }
    }

    /// Boolean check: a violation counts as defect 1.
    fn record_bool(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 });
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            samples: self.samples,
            passed: self.max_defect <= self.tolerance,
            max_defect: self.max_defect,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PostulateSuite {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for PostulateSuite {
    fn default() -> Self {
        Self {
            dims: (2..=8).collect(),
            trials: 50,
            seed: 2024,
        }
    }
}

/// Random hermitian with a prescribed eigenvalue list in a random basis.
fn conjugated_diagonal(u: &CMatrix, values: &[f64]) -> Observable {
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|v| c(*v, 0.0)),
    ));
    Observable::symmetrized(u * d * u.adjoint())
}

/// Element of the context: `basis diag(values) basis^dagger`.
fn in_context(ctx: &MeasurementContext, values: &[f64]) -> Observable {
    conjugated_diagonal(ctx.basis(), values)
}

fn random_context<R: Rng + ?Sized>(dim: usize, degenerate: bool, rng: &mut R) -> Result<Arc<MeasurementContext>> {
    let u = random_unitary(dim, rng);
    let values: Vec<f64> = if degenerate {
        // few distinct values force completion
        (0..dim).map(|_| rng.random_range(0..2) as f64).collect()
    } else {
        (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()
    };
    let g = conjugated_diagonal(&u, &values);
    context_from(vec![("G".into(), g)])
}

impl PostulateSuite {
    pub fn run(&self) -> Result<PostulateReport> {
        let mut anti = Tally::new("involution_anti_automorphism", 1e-12);
        let mut assoc = Tally::new("associativity", 1e-12);
        let mut p1i = Tally::new("star_square_is_hermitian_square", 1e-10);
        let mut p1ii = Tally::new("star_square_zero_implies_zero", 1e-6);
        let mut unit = Tally::new("unity", 1e-14);
        let mut unitary_inv = Tally::new("spectrum_unitary_invariance", 1e-8);
        let mut split = Tally::new("hermitian_split", 1e-14);
        let mut basis_unitary = Tally::new("context_basis_unitary", 1e-10);
        let mut gen_diag = Tally::new("context_generators_diagonal", 1e-8);
        let mut maximal = Tally::new("context_maximality", 0.0);
        let mut mult = Tally::new("character_multiplicativity", 1e-10);
        let mut linear = Tally::new("character_linearity", 1e-10);
        let mut zero = Tally::new("value_of_zero", 1e-12);
        let mut one = Tally::new("value_of_unity", 1e-12);
        let mut square_pos = Tally::new("value_of_square_nonnegative", 1e-12);
        let mut in_spec = Tally::new("value_in_spectrum", CLUSTER_TOL);
        let mut attained = Tally::new("spectrum_attained", 0.0);
        let mut consistency = Tally::new("context_spectrum_consistency", CLUSTER_TOL);
        let mut dispersion = Tally::new("zero_dispersion", 1e-10);

        for &dim in &self.dims {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (dim as u64).wrapping_mul(0x9e37_79b9));
            let unity = make_unity(dim)?;
            for trial in 0..self.trials {
                let r = random_unit_element(dim, &mut rng);
                let s = random_unit_element(dim, &mut rng);
                let t = random_unit_element(dim, &mut rng);

                let lhs = r.mul(&s)?.involute();
                let rhs = s.involute().mul(&r.involute())?;
                anti.record(lhs.sub(&rhs)?.frobenius_norm());
                anti.record(r.involute().involute().sub(&r)?.frobenius_norm());

                assoc.record(r.mul(&s)?.mul(&t)?.sub(&r.mul(&s.mul(&t)?)?)?.frobenius_norm());

                let rr = r.star_square();
                let root = principal_sqrt(&rr);
                p1i.record(root.hermiticity_defect().max(root.mul(&root)?.sub(&rr)?.frobenius_norm()));

                let tiny = random_element(dim, &mut rng).scale(c(1e-9, 0.0));
                if tiny.star_square().frobenius_norm() < 1e-12 {
                    p1ii.record(tiny.frobenius_norm());
                }

                unit.record(unity.mul(&r)?.sub(&r)?.frobenius_norm());
                unit.record(r.mul(&unity)?.sub(&r)?.frobenius_norm());

                let h = Observable::symmetrized(r.matrix().clone());
                let u = random_unitary(dim, &mut rng);
                let conj = Observable::symmetrized(&u * h.matrix() * u.adjoint());
                unitary_inv.record(spectrum_defect(&spectrum(&h), &spectrum(&conj)));

                let (a, b) = split_hermitian(&r);
                let rebuilt = a.add(&b.scale(c(0.0, 1.0)))?;
                split.record(rebuilt.sub(&r)?.frobenius_norm());
                let (a2, b2) = split_hermitian(&r.involute());
                split.record(a2.sub(&a)?.frobenius_norm().max(b2.add(&b)?.frobenius_norm()));

                let ctx = random_context(dim, trial % 2 == 1, &mut rng)?;
                let basis = ctx.basis();
                basis_unitary.record((basis.adjoint() * basis - CMatrix::identity(dim, dim)).norm());
                for g in ctx.generators() {
                    let m = ctx.transform(g.observable());
                    let diag = CMatrix::from_diagonal(&m.diagonal());
                    gen_diag.record((m - diag).norm());
                }
                let gens: Vec<&AlgebraElement> =
                    ctx.generators().iter().map(|g| g.observable().element()).collect();
                maximal.record((commutant_dimension(&gens)? as f64 - dim as f64).abs());

                let va: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                let vb: Vec<f64> = (0..dim).map(|_| rng.random_range(-2..=2) as f64).collect();
                let qa = in_context(&ctx, &va);
                let qb = in_context(&ctx, &vb);
                let prod = qa.commuting_product(&qb)?;
                let (x, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let lin = qa.combine(x, &qb, y)?;
                let zero_obs = Observable::symmetrized(CMatrix::zeros(dim, dim));
                let unity_obs = Observable::unity(dim)?;
                let sq = qb.square();
                let spec_a = spectrum(&qa);
                let spec_b = spectrum(&qb);
                for chi in characters_of(&ctx) {
                    let fa = chi.evaluate(&qa)?;
                    let fb = chi.evaluate(&qb)?;
                    mult.record((chi.evaluate(&prod)? - fa * fb).abs());
                    linear.record((chi.evaluate(&lin)? - (x * fa + y * fb)).abs());
                    zero.record(chi.evaluate(&zero_obs)?.abs());
                    one.record((chi.evaluate(&unity_obs)? - 1.0).abs());
                    square_pos.record((-chi.evaluate(&sq)?).max(0.0));
                    for (f, spec) in [(fa, &spec_a), (fb, &spec_b)] {
                        let dist = spec
                            .iter()
                            .map(|p| (p.value - f).abs())
                            .fold(f64::INFINITY, f64::min);
                        in_spec.record(dist);
                    }
                    let state = realize_state(&ctx, &chi, trial as u64)?;
                    dispersion.record(dispersion_defect(&state, &qb)?);
                }
                for p in spec_b.iter() {
                    let hit = characters_of(&ctx)
                        .iter()
                        .any(|chi| chi.evaluate(&qb).is_ok_and(|v| (v - p.value).abs() <= CLUSTER_TOL));
                    attained.record_bool(hit);
                }
                consistency.record(spectrum_defect(&ctx.spectrum_in_context(&qa)?, &spec_a));
                consistency.record(spectrum_defect(&ctx.spectrum_in_context(&qb)?, &spec_b));
                for g in ctx.generators() {
                    let local = ctx.spectrum_in_context(g.observable())?;
                    consistency.record(spectrum_defect(&local, &spectrum(g.observable())));
                }
            }
        }

        let checks: Vec<CheckResult> = [
            anti, assoc, p1i, p1ii, unit, unitary_inv, split, basis_unitary, gen_diag, maximal, mult,
            linear, zero, one, square_pos, in_spec, attained, consistency, dispersion,
        ]
        .into_iter()
        .map(Tally::finish)
        .collect();
        let passed = checks.iter().all(|c| c.passed);
        Ok(PostulateReport {
            dims: self.dims.clone(),
            trials: self.trials,
            seed: self.seed,
            checks,
            passed,
        })
    }
}

/// `|phi(A^2) - phi(A)^2|` for `A` in the state's home context.
pub fn dispersion_defect(state: &PhysicalState, a: &Observable) -> Result<f64> {
    let v = state.value(a)?;
    Ok((state.value(&a.square())? - v * v).abs())
}

/// One qubit valuation visiting the contexts of `sigma_x` and `sigma_z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitValuation {
    pub value_x: f64,
    pub value_z: f64,
    pub sum: f64,
    pub dispersion_x: f64,
    pub dispersion_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityReport {
    pub spectrum_of_sum: Vec<f64>,
    pub valuations: Vec<QubitValuation>,
    /// No valuation sum lies in the spectrum of `sigma_x + sigma_z`.
    pub sums_outside_spectrum: bool,
    pub max_dispersion: f64,
}

/// Enumerates all qubit valuations defined on the contexts of `sigma_x` and
/// `sigma_z` and compares `phi(sx) + phi(sz)` with the spectrum of
/// `sx + sz`, where every valuation of `sx + sz` must lie.
pub fn nonlinearity_check() -> Result<NonlinearityReport> {
    let (x, z) = (pauli_x(), pauli_z());
    let ctx_x = crate::context::context_of("sx", &x)?;
    let ctx_z = crate::context::context_of("sz", &z)?;
    let sum_spec: Vec<f64> = spectrum(&x.combine(1.0, &z, 1.0)?).iter().map(|p| p.value).collect();
    let mut valuations = Vec::new();
    for (id, chi_x) in characters_of(&ctx_x).into_iter().enumerate() {
        let home = realize_state(&ctx_x, &chi_x, id as u64)?;
        for chi_z in home.admissible_characters(&ctx_z)? {
            let phi = home.extend_with(&chi_z)?;
            let (vx, vz) = (phi.value(&x)?, phi.value(&z)?);
            // on its second context the state is still dispersion-free
            let dz = (phi.value(&z.square())? - vz * vz).abs();
            valuations.push(QubitValuation {
                value_x: vx,
                value_z: vz,
                sum: vx + vz,
                dispersion_x: dispersion_defect(&phi, &x)?,
                dispersion_z: dz,
            });
        }
    }
    let sums_outside_spectrum = valuations
        .iter()
        .all(|v| sum_spec.iter().all(|s| (v.sum - s).abs() > 0.1));
    let max_dispersion = valuations
        .iter()
        .map(|v| v.dispersion_x.max(v.dispersion_z))
        .fold(0.0, f64::max);
    Ok(NonlinearityReport {
        spectrum_of_sum: sum_spec,
        valuations,
        sums_outside_spectrum,
        max_dispersion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let report = PostulateSuite {
            dims: vec![2, 3, 4],
            trials: 6,
            seed: 1,
        }
        .run()
        .unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
            assert!(c.samples > 0, "{} never sampled", c.name);
        }
    }

    #[test]
    fn qubit_valuations_are_nonlinear() {
        let r = nonlinearity_check().unwrap();
        assert_eq!(r.valuations.len(), 4);
        assert!(r.sums_outside_spectrum);
        assert!(r.max_dispersion <= 1e-10);
    }
}
