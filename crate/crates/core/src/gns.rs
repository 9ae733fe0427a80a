//! Norms defined through quantum states and the GNS representation.
//!
//! The norm of `R` is `sup_Q Psi_Q(R*R)` over quantum states. Over a finite
//! pool of contexts the supremum is attained as soon as the pool holds the
//! context generated by `R*R`, which every call adds.
//!
//! The GNS construction uses the matrix units `E_ij` as spanning set: the
//! Gram matrix `Psi(E_k* E_l)` gives the inner product, its range is the
//! quotient by the null space, and left multiplication acts on the quotient.
//! Completion in the norm is trivial in finite dimension.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{c, eigh, make_unity, AlgebraElement, CMatrix, CVector};
use crate::context::{context_of, MeasurementContext};
use crate::ensemble::QuantumState;
use crate::error::{Error, Result};

/// Gram eigenvalues above this span the quotient.
pub const RANK_TOL: f64 = 1e-10;
/// Largest negative Gram eigenvalue tolerated as rounding.
pub const PSD_TOL: f64 = 1e-10;

fn check_pool(dim: usize, pool: &[Arc<MeasurementContext>]) -> Result<()> {
    for ctx in pool {
        if ctx.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: ctx.dim(),
            });
        }
    }
    Ok(())
}

/// `sup Psi(R*R)` over every character state of the pool contexts and of
/// the context generated by `R*R`.
pub fn state_norm_squared(r: &AlgebraElement, pool: &[Arc<MeasurementContext>]) -> Result<f64> {
    check_pool(r.dim(), pool)?;
    let rr = r.star_square();
    let own = context_of("R*R", &rr)?;
    let mut best = 0.0f64;
    for ctx in pool.iter().chain(std::iter::once(&own)) {
        let m = ctx.transform(&rr);
        for i in 0..ctx.dim() {
            best = best.max(m[(i, i)].re);
        }
    }
    Ok(best)
}

pub fn state_norm(r: &AlgebraElement, pool: &[Arc<MeasurementContext>]) -> Result<f64> {
    Ok(state_norm_squared(r, pool)?.max(0.0).sqrt())
}

/// `Psi(R*R) Psi(S*S) - Psi(R*S) Psi(S*R)`; nonnegative up to rounding.
pub fn check_cbs(psi: &QuantumState, r: &AlgebraElement, s: &AlgebraElement) -> Result<f64> {
    let rs = r.involute().mul(s)?;
    let sr = s.involute().mul(r)?;
    let rr = psi.expectation(&r.star_square())?.re;
    let ss = psi.expectation(&s.star_square())?.re;
    let cross = psi.expectation(&rs)? * psi.expectation(&sr)?;
    Ok(rr * ss - cross.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CStarCheck {
    /// `|R*R|`
    pub lhs: f64,
    /// `|R|^2`
    pub rhs: f64,
    pub defect: f64,
}

pub fn check_cstar_identity(r: &AlgebraElement, pool: &[Arc<MeasurementContext>]) -> Result<CStarCheck> {
    let rr = r.star_square();
    let lhs = state_norm(&rr, pool)?;
    let rhs = state_norm_squared(r, pool)?;
    Ok(CStarCheck {
        lhs,
        rhs,
        defect: (lhs - rhs).abs(),
    })
}

/// Matrix unit `E_{ij}` for the row-major index `k = i n + j`.
pub fn matrix_unit(dim: usize, k: usize) -> AlgebraElement {
    let mut m = CMatrix::zeros(dim, dim);
    m[(k / dim, k % dim)] = c(1.0, 0.0);
    AlgebraElement::from_matrix(m).expect("square")
}

fn vectorize(m: &CMatrix) -> CVector {
    let n = m.nrows();
    CVector::from_fn(n * n, |k, _| m[(k / n, k % n)])
}

fn unvectorize(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| v[i * n + j])
}

#[derive(Clone, Debug)]
pub struct GnsRepresentation {
    source_state: QuantumState,
    gram: CMatrix,
    /// Columns `f_m` in matrix-unit coordinates, Gram-orthonormal.
    quotient_basis: CMatrix,
    /// `f_m^dagger G`, the map from coordinates to quotient components.
    coordinates: CMatrix,
    cyclic_vector: CVector,
}

/// Builds the GNS triple of the state functional of `psi`.
pub fn gns_construct(psi: &QuantumState) -> Result<GnsRepresentation> {
    let n = psi.dim();
    let nn = n * n;
    let units: Vec<AlgebraElement> = (0..nn).map(|k| matrix_unit(n, k)).collect();
    let mut gram = CMatrix::zeros(nn, nn);
    for (k, ek) in units.iter().enumerate() {
        let ek_star = ek.involute();
        for (l, el) in units.iter().enumerate() {
            gram[(k, l)] = psi.expectation(&ek_star.mul(el)?)?;
        }
    }
    let herm_defect = (&gram - gram.adjoint()).norm();
    if herm_defect > PSD_TOL {
        return Err(Error::NumericalFailure {
            what: "Gram matrix is not hermitian".into(),
            value: herm_defect,
        });
    }
    let (values, vectors) = eigh(&((&gram + gram.adjoint()) * c(0.5, 0.0)));
    if let Some(&min) = values.first() {
        if min < -PSD_TOL {
            return Err(Error::NumericalFailure {
                what: "Gram matrix is not positive semidefinite".into(),
                value: min,
            });
        }
    }
    let kept: Vec<usize> = (0..nn).filter(|&k| values[k] > RANK_TOL).collect();
    let rank = kept.len();
    let quotient_basis = CMatrix::from_fn(nn, rank, |row, m| {
        vectors[(row, kept[m])] / c(values[kept[m]].sqrt(), 0.0)
    });
    let coordinates = quotient_basis.adjoint() * &gram;
    let unity = vectorize(make_unity(n)?.matrix());
    let cyclic_vector = &coordinates * unity;
    Ok(GnsRepresentation {
        source_state: psi.clone(),
        gram,
        quotient_basis,
        coordinates,
        cyclic_vector,
    })
}

impl GnsRepresentation {
    pub fn source_state(&self) -> &QuantumState {
        &self.source_state
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn quotient_basis(&self) -> &CMatrix {
        &self.quotient_basis
    }

    pub fn quotient_dim(&self) -> usize {
        self.quotient_basis.ncols()
    }

    pub fn cyclic_vector(&self) -> &CVector {
        &self.cyclic_vector
    }

    /// Matrix of left multiplication by `r` on the quotient.
    pub fn represent(&self, r: &AlgebraElement) -> Result<CMatrix> {
        let n = self.source_state.dim();
        if r.dim() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: r.dim(),
            });
        }
        let rank = self.quotient_dim();
        let mut images = CMatrix::zeros(n * n, rank);
        for m in 0..rank {
            let x = unvectorize(&self.quotient_basis.column(m).into_owned(), n);
            images.set_column(m, &vectorize(&(r.matrix() * x)));
        }
        Ok(&self.coordinates * images)
    }

    /// `xi^dagger pi(R) xi`.
    pub fn vector_state(&self, r: &AlgebraElement) -> Result<Complex64> {
        let pi = self.represent(r)?;
        Ok(self.cyclic_vector.dotc(&(pi * &self.cyclic_vector)))
    }

    /// Defect report over all pairs of matrix units.
    pub fn report(&self) -> Result<GnsReport> {
        let n = self.source_state.dim();
        let units: Vec<AlgebraElement> = (0..n * n).map(|k| matrix_unit(n, k)).collect();
        let reps: Vec<CMatrix> = units.iter().map(|u| self.represent(u)).collect::<Result<_>>()?;
        let mut hom: f64 = 0.0;
        let mut recovery: f64 = 0.0;
        for (a, ua) in units.iter().enumerate() {
            hom = hom.max((self.represent(&ua.involute())? - reps[a].adjoint()).norm());
            let direct = self.source_state.expectation(ua)?;
            let via = self.cyclic_vector.dotc(&(&reps[a] * &self.cyclic_vector));
            recovery = recovery.max((direct - via).norm());
            for (b, ub) in units.iter().enumerate() {
                let prod = self.represent(&ua.mul(ub)?)?;
                hom = hom.max((prod - &reps[a] * &reps[b]).norm());
            }
        }
        let rank = self.quotient_dim();
        let unity = self.represent(&make_unity(n)?)?;
        Ok(GnsReport {
            algebra_dim: n,
            quotient_dim: rank,
            homomorphism_defect: hom,
            state_recovery_defect: recovery,
            unity_defect: (unity - CMatrix::identity(rank, rank)).norm(),
            cyclic_norm: self.cyclic_vector.norm(),
        })
    }
}

/// GNS report as written by the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnsReport {
    pub algebra_dim: usize,
    pub quotient_dim: usize,
    /// Max over matrix-unit pairs of `|pi(RS) - pi(R)pi(S)|` and `|pi(R*) - pi(R)^dagger|`.
    pub homomorphism_defect: f64,
    pub state_recovery_defect: f64,
    pub unity_defect: f64,
    pub cyclic_norm: f64,
}

impl GnsReport {
    pub fn passed(&self) -> bool {
        self.homomorphism_defect <= 1e-8
            && self.state_recovery_defect <= 1e-10
            && self.unity_defect <= 1e-8
            && (self.cyclic_norm - 1.0).abs() <= 1e-10
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{operator_norm, pauli_x, pauli_y, pauli_z, I};
    use crate::context::context_of;
    use crate::ensemble::quantum_state;
    use crate::random::{random_element, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pool_of(dim: usize) -> Vec<Arc<MeasurementContext>> {
        let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
        vec![context_of("h", &random_hermitian(dim, &mut rng)).unwrap()]
    }

    #[test]
    fn state_norms_of_simple_elements() {
        assert!((state_norm_squared(&pauli_x(), &pool_of(2)).unwrap() - 1.0).abs() < 1e-14);
        let d = AlgebraElement::diagonal(&[1.0, -3.0]).unwrap();
        assert!((state_norm_squared(&d, &[]).unwrap() - 9.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let r = random_element(4, &mut rng);
        let oracle = operator_norm(&r).powi(2);
        assert!((state_norm_squared(&r, &pool_of(4)).unwrap() - oracle).abs() <= 1e-8);
    }

    #[test]
    fn cbs_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ctx = context_of("h", &random_hermitian(3, &mut rng)).unwrap();
        let psi = quantum_state(&ctx, 1).unwrap();
        let r = random_element(3, &mut rng);
        assert!(check_cbs(&psi, &r, &r).unwrap().abs() < 1e-10);
        // S = I: variance
        let unity = make_unity(3).unwrap();
        let var = check_cbs(&psi, &r, &unity).unwrap();
        let mean = psi.expectation(&r).unwrap();
        let oracle = psi.expectation(&r.star_square()).unwrap().re - mean.norm_sqr();
        assert!((var - oracle).abs() < 1e-10 && var >= -1e-10);
        for _ in 0..20 {
            let s = random_element(3, &mut rng);
            assert!(check_cbs(&psi, &r, &s).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn cstar_identity_for_raising_operator() {
        let raising = pauli_x().add(&pauli_y().scale(I)).unwrap();
        let check = check_cstar_identity(&raising, &[]).unwrap();
        assert!((check.rhs - 4.0).abs() < 1e-12);
        assert!((check.lhs - 4.0).abs() < 1e-12);
        let unity = check_cstar_identity(&make_unity(2).unwrap(), &[]).unwrap();
        assert!((unity.lhs - 1.0).abs() < 1e-14 && (unity.rhs - 1.0).abs() < 1e-14);
        assert!(unity.defect < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let r = random_element(5, &mut rng);
        assert!(check_cstar_identity(&r, &pool_of(5)).unwrap().defect <= 1e-8);
    }

    #[test]
    fn pool_dimension_is_checked() {
        assert!(state_norm_squared(&pauli_x(), &pool_of(3)).is_err());
    }

    /// Rank oracle from an independent SVD of the Gram matrix built from
    /// `conj(v_j) v_j' delta_{ii'}`.
    fn gram_rank(psi: &QuantumState) -> usize {
        let n = psi.dim();
        let v = psi.vector();
        let g = CMatrix::from_fn(n * n, n * n, |k, l| {
            let (i, j) = (k / n, k % n);
            let (i2, j2) = (l / n, l % n);
            if i == i2 {
                v[j].conj() * v[j2]
            } else {
                c(0.0, 0.0)
            }
        });
        g.svd(false, false).singular_values.iter().filter(|s| **s > 1e-10).count()
    }

    #[test]
    fn qubit_gns() {
        let psi = quantum_state(&context_of("sz", &pauli_z()).unwrap(), 0).unwrap();
        let gns = gns_construct(&psi).unwrap();
        assert_eq!(gns.quotient_dim(), 2);
        assert_eq!(gram_rank(&psi), 2);
        let report = gns.report().unwrap();
        assert!(report.passed(), "{report:?}");
        for a in [pauli_x(), pauli_z()] {
            let direct = psi.expectation(&a).unwrap();
            assert!((gns.vector_state(&a).unwrap() - direct).norm() <= 1e-10);
        }
    }

    #[test]
    fn random_pure_states_have_full_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(90);
        for n in 2..=4 {
            let ctx = context_of("h", &random_hermitian(n, &mut rng)).unwrap();
            let psi = quantum_state(&ctx, 0).unwrap();
            let gns = gns_construct(&psi).unwrap();
            assert_eq!(gns.quotient_dim(), gram_rank(&psi));
            assert_eq!(gns.quotient_dim(), n);
            assert!(gns.report().unwrap().passed());
        }
    }
}
