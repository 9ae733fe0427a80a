//! Finite-dimensional involutive algebras realized as full complex matrix
//! algebras `M_n`.
//!
//! Every element is a square complex matrix; the involution is the conjugate
//! transpose. Hermitian elements form the real linear space of observables.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest hermiticity defect `|R - R*|_F` accepted for an observable.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Eigenvalues closer than this belong to one spectral point.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Tolerance for exact algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Commutators with Frobenius norm at most this are treated as zero.
pub const COMMUTE_TOL: f64 = 1e-10;

#[cfg(test)]
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// An element `R` of `M_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    entries: CMatrix,
}

impl AlgebraElement {
    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self { entries })
    }

    /// Builds an element from row-major real and imaginary parts.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let dim = re.len();
        if im.len() != dim {
            return Err(Error::Model(format!(
                "real part has {} rows, imaginary part {}",
                dim,
                im.len()
            )));
        }
        for (r, i) in re.iter().zip(im) {
            if r.len() != dim || i.len() != dim {
                return Err(Error::NotSquare {
                    rows: dim,
                    cols: r.len().max(i.len()),
                });
            }
        }
        Self::from_matrix(CMatrix::from_fn(dim, dim, |r, col| {
            c(re[r][col], im[r][col])
        }))
    }

    /// Row-major constructor for real matrices.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::NotSquare {
                rows: dim,
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        Self::from_matrix(CMatrix::from_fn(dim, dim, |r, col| c(rows[r][col], 0.0)))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let dim = values.len();
        Self::from_matrix(CMatrix::from_fn(dim, dim, |r, col| {
            if r == col {
                c(values[r], 0.0)
            } else {
                Complex64::default()
            }
        }))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self {
            entries: CMatrix::zeros(dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            entries: &self.entries + &other.entries,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            entries: &self.entries - &other.entries,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            entries: &self.entries * &other.entries,
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            entries: &self.entries * factor,
        }
    }

    /// The involution `R -> R*` (conjugate transpose).
    pub fn involute(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
        }
    }

    /// `R* R`, always hermitian positive semidefinite.
    pub fn star_square(&self) -> Observable {
        Observable::symmetrized(self.entries.adjoint() * &self.entries)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).norm()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITICITY_TOL
    }
}

/// The unity `I` of `M_dim`.
pub fn make_unity(dim: usize) -> Result<AlgebraElement> {
    if dim == 0 {
        return Err(Error::InvalidDimension(0));
    }
    Ok(AlgebraElement {
        entries: CMatrix::identity(dim, dim),
    })
}

/// A hermitian element: a member of the real space of observables.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    element: AlgebraElement,
}

impl Observable {
    /// Accepts `element` when its hermiticity defect is within tolerance and
    /// stores its hermitian part.
    pub fn new(element: AlgebraElement) -> Result<Self> {
        let defect = element.hermiticity_defect();
        if defect.is_nan() || defect > HERMITICITY_TOL {
            return Err(Error::NonHermitian { defect });
        }
        Ok(Self::symmetrized(element.entries))
    }

    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        Self::new(AlgebraElement::from_matrix(entries)?)
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(AlgebraElement::diagonal(values)?)
    }

    pub fn unity(dim: usize) -> Result<Self> {
        Ok(Self {
            element: make_unity(dim)?,
        })
    }

    pub(crate) fn symmetrized(entries: CMatrix) -> Self {
        let herm = (&entries + entries.adjoint()) * c(0.5, 0.0);
        Self {
            element: AlgebraElement { entries: herm },
        }
    }

    pub fn element(&self) -> &AlgebraElement {
        &self.element
    }

    pub fn into_element(self) -> AlgebraElement {
        self.element
    }

    /// Real linear combination `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Observable, b: f64) -> Result<Observable> {
        self.element.check_dim(&other.element)?;
        Ok(Self::symmetrized(
            &self.element.entries * c(a, 0.0) + &other.element.entries * c(b, 0.0),
        ))
    }

    pub fn scale_real(&self, a: f64) -> Observable {
        Self::symmetrized(&self.element.entries * c(a, 0.0))
    }

    pub fn square(&self) -> Observable {
        Self::symmetrized(&self.element.entries * &self.element.entries)
    }

    /// Product of two commuting observables.
    pub fn commuting_product(&self, other: &Observable) -> Result<Observable> {
        let comm = commutator(&self.element, &other.element)?;
        if !comm.compatible {
            return Err(Error::IncompatibleGenerators {
                first: "lhs".into(),
                second: "rhs".into(),
                defect: comm.defect,
            });
        }
        Ok(Self::symmetrized(&self.element.entries * &other.element.entries))
    }
}

impl Deref for Observable {
    type Target = AlgebraElement;

    fn deref(&self) -> &AlgebraElement {
        &self.element
    }
}

impl AsRef<AlgebraElement> for Observable {
    fn as_ref(&self) -> &AlgebraElement {
        &self.element
    }
}

/// `AB - BA` together with the compatibility verdict.
#[derive(Clone, Debug)]
pub struct Commutator {
    pub value: AlgebraElement,
    pub defect: f64,
    pub compatible: bool,
}

pub fn commutator(a: &AlgebraElement, b: &AlgebraElement) -> Result<Commutator> {
    a.check_dim(b)?;
    let value = &a.entries * &b.entries - &b.entries * &a.entries;
    let defect = value.norm();
    Ok(Commutator {
        value: AlgebraElement { entries: value },
        defect,
        compatible: defect <= COMMUTE_TOL,
    })
}

/// One point of a clustered spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub value: f64,
    pub multiplicity: usize,
}

/// Groups ascending values into spectral points; neighbours closer than
/// [`CLUSTER_TOL`] merge, and each point carries the mean of its members.
pub fn cluster_values(sorted: &[f64]) -> Vec<SpectralPoint> {
    let mut points: Vec<SpectralPoint> = Vec::new();
    let mut sum = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for &v in sorted {
        match points.last_mut() {
            Some(last) if v - prev <= CLUSTER_TOL => {
                last.multiplicity += 1;
                sum += v;
                last.value = sum / last.multiplicity as f64;
            }
            _ => {
                sum = v;
                points.push(SpectralPoint {
                    value: v,
                    multiplicity: 1,
                });
            }
        }
        prev = v;
    }
    points
}

/// Eigendecomposition of a hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

/// Ascending eigenvalues of a hermitian matrix.
pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// The clustered spectrum of an observable, ascending.
pub fn spectrum(a: &Observable) -> Vec<SpectralPoint> {
    cluster_values(&eigvalsh(a.matrix()))
}

/// Checked variant for raw elements: fails when the element is not hermitian.
pub fn spectrum_of(a: &AlgebraElement) -> Result<Vec<SpectralPoint>> {
    Ok(spectrum(&Observable::new(a.clone())?))
}

/// Largest singular value.
pub fn operator_norm(r: &AlgebraElement) -> f64 {
    let gram = r.entries.adjoint() * &r.entries;
    let top = eigvalsh(&gram).last().copied().unwrap_or(0.0);
    top.max(0.0).sqrt()
}

/// `R = A + iB` with `A = (R + R*)/2`, `B = (R - R*)/2i`.
pub fn split_hermitian(r: &AlgebraElement) -> (Observable, Observable) {
    let adj = r.entries.adjoint();
    let a = (&r.entries + &adj) * c(0.5, 0.0);
    let b = (&r.entries - &adj) * c(0.0, -0.5);
    (
        Observable {
            element: AlgebraElement { entries: a },
        },
        Observable {
            element: AlgebraElement { entries: b },
        },
    )
}

/// Principal square root of a positive semidefinite observable; small
/// negative eigenvalues from rounding are clamped to zero.
pub fn principal_sqrt(a: &Observable) -> Observable {
    let (values, vectors) = eigh(a.matrix());
    let roots = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|v| c(v.max(0.0).sqrt(), 0.0)),
    ));
    Observable::symmetrized(&vectors * roots * vectors.adjoint())
}

/// Dimension of `{X in M_n : [X, G] = 0 for every G}`.
///
/// Solves the stacked linear system `X G - G X = 0` on `vec(X)` and counts
/// singular values below `1e-7`.
pub fn commutant_dimension(generators: &[&AlgebraElement]) -> Result<usize> {
    let Some(first) = generators.first() else {
        return Err(Error::EmptyGeneratingSet);
    };
    let n = first.dim();
    let nn = n * n;
    let mut normal = CMatrix::zeros(nn, nn);
    for g in generators {
        if g.dim() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: g.dim(),
            });
        }
        // Row-major vec: (XG - GX)_{ij} = sum_k X_ik G_kj - G_ik X_kj.
        let mut op = CMatrix::zeros(nn, nn);
        for i in 0..n {
            for j in 0..n {
                let row = i * n + j;
                for k in 0..n {
                    op[(row, i * n + k)] += g.entries[(k, j)];
                    op[(row, k * n + j)] -= g.entries[(i, k)];
                }
            }
        }
        normal += op.adjoint() * op;
    }
    let nullity = eigvalsh(&normal)
        .into_iter()
        .filter(|v| v.max(0.0).sqrt() < 1e-7)
        .count();
    Ok(nullity)
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
    AlgebraElement {
        entries: a.entries.kronecker(&b.entries),
    }
}

pub fn kron_observables(a: &Observable, b: &Observable) -> Observable {
    Observable::symmetrized(a.matrix().kronecker(b.matrix()))
}

pub fn pauli_x() -> Observable {
    Observable::symmetrized(CMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
    ))
}

pub fn pauli_y() -> Observable {
    Observable::symmetrized(CMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
    ))
}

pub fn pauli_z() -> Observable {
    Observable::symmetrized(CMatrix::from_row_slice(
        2,
        2,
        &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
    ))
}

/// Spin component `cos(theta) sigma_z + sin(theta) sigma_x` along a direction
/// in the x-z plane at polar angle `theta`.
pub fn spin_xz(theta: f64) -> Observable {
    Observable::symmetrized(
        pauli_z().matrix() * c(theta.cos(), 0.0) + pauli_x().matrix() * c(theta.sin(), 0.0),
    )
}

/// Real and imaginary parts, row-major. Serialized form of a matrix in model
/// files and reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexRows {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl ComplexRows {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|col| f(&m[(r, col)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }

    pub fn to_element(&self) -> Result<AlgebraElement> {
        AlgebraElement::from_parts(&self.re, &self.im)
    }
}
