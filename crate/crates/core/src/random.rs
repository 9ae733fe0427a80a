//! Random elements for property checks and stress pools.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::algebra::{c, AlgebraElement, CMatrix, CVector, Observable};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| c(gaussian(rng), gaussian(rng)))
}

pub fn random_element<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> AlgebraElement {
    AlgebraElement::from_matrix(random_matrix(dim, rng)).expect("square, nonempty")
}

/// Random element scaled to unit Frobenius norm.
pub fn random_unit_element<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> AlgebraElement {
    let r = random_element(dim, rng);
    let norm = r.frobenius_norm();
    r.scale(c(1.0 / norm, 0.0))
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Observable {
    Observable::symmetrized(random_matrix(dim, rng))
}

/// Haar-distributed unitary from the QR decomposition of a Gaussian matrix,
/// with the phases of `R`'s diagonal folded back into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let qr = random_matrix(dim, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for col in 0..dim {
        let d = r[(col, col)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for row in 0..dim {
            q[(row, col)] *= phase;
        }
    }
    q
}

pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(dim, |_, _| c(gaussian(rng), gaussian(rng)));
    let norm = v.norm();
    v / c(norm, 0.0)
}
