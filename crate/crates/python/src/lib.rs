//! Python bindings. Reports come back as plain dicts and lists.

use std::sync::Arc;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use opalab::algebra::{spectrum, AlgebraElement, Observable};
use opalab::context::{context_from, MeasurementContext};
use opalab::ensemble::{
    born_measure, relevant_values, sample_relevant_set_partitioned, QuantumState, SamplingPlan,
};
use opalab::experiments::{run_chsh, run_epr_bohm, ChshAngles};
use opalab::gns::{gns_construct, state_norm};
use opalab::models::Model;
use opalab::physical_state::TrialCounter;
use opalab::postulates::PostulateSuite;
use opalab::statistics::verify_quantum_average_with;
use opalab::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::UnknownName { .. } => PyKeyError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for opalab::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

/// Serializes through JSON so nested reports become dicts.
fn to_python<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

fn element_from(re: Vec<Vec<f64>>, im: Option<Vec<Vec<f64>>>) -> PyResult<AlgebraElement> {
    let im = im.unwrap_or_else(|| re.iter().map(|row| vec![0.0; row.len()]).collect());
    AlgebraElement::from_parts(&re, &im).py()
}

fn split_rows(m: &opalab::CMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = |f: fn(&num_complex::Complex64) -> f64| {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
            .collect()
    };
    (rows(|z| z.re), rows(|z| z.im))
}

fn plan(seed: u64, partitions: usize) -> SamplingPlan {
    SamplingPlan::new(seed).with_partitions(partitions)
}

#[pyclass(name = "Observable", module = "opalab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyObservable {
    inner: Observable,
}

#[pymethods]
impl PyObservable {
    /// Hermitian matrix from real and imaginary row lists.
    #[new]
    #[pyo3(signature = (re, im = None))]
    fn new(re: Vec<Vec<f64>>, im: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        Ok(Self {
            inner: Observable::new(element_from(re, im)?).py()?,
        })
    }

    #[staticmethod]
    fn pauli(axis: &str) -> PyResult<Self> {
        let inner = match axis {
            "x" => opalab::pauli_x(),
            "y" => opalab::pauli_y(),
            "z" => opalab::pauli_z(),
            _ => return Err(PyKeyError::new_err(format!("unknown Pauli axis `{axis}`"))),
        };
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `(value, multiplicity)` pairs in ascending order.
    fn spectrum(&self) -> Vec<(f64, usize)> {
        spectrum(&self.inner).iter().map(|p| (p.value, p.multiplicity)).collect()
    }

    /// `(re, im)` row lists.
    fn matrix(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        split_rows(self.inner.matrix())
    }

    /// `a * self + b * other`
    fn combine(&self, a: f64, other: &PyObservable, b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.combine(a, &other.inner, b).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Observable(dim={})", self.inner.dim())
    }
}

#[pyclass(name = "Context", module = "opalab", frozen)]
struct PyContext {
    inner: Arc<MeasurementContext>,
}

#[pymethods]
impl PyContext {
    /// Maximal commutative context generated by named, pairwise commuting
    /// observables.
    #[new]
    fn new(generators: Vec<(String, PyRef<'_, PyObservable>)>) -> PyResult<Self> {
        let set = generators
            .into_iter()
            .map(|(name, obs)| (name, obs.inner.clone()))
            .collect();
        Ok(Self {
            inner: context_from(set).py()?,
        })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn contains(&self, a: &PyObservable) -> bool {
        self.inner.contains(&a.inner)
    }

    /// Generator values labelling character `index`.
    fn generator_values(&self, index: usize) -> PyResult<Vec<(String, f64)>> {
        if index >= self.inner.dim() {
            return Err(to_py_err(Error::IndexOutOfRange {
                index,
                dim: self.inner.dim(),
            }));
        }
        Ok(self.inner.generator_values(index))
    }

    /// Value of `a` at every character, in basis order.
    fn values(&self, a: &PyObservable) -> PyResult<Vec<f64>> {
        self.inner.diagonal_values(&a.inner).py()
    }

    fn dump<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.inner.dump())
    }

    fn __repr__(&self) -> String {
        format!("Context(label={:?}, dim={})", self.inner.label(), self.inner.dim())
    }
}

#[pyclass(name = "QuantumState", module = "opalab", frozen)]
struct PyQuantumState {
    inner: QuantumState,
}

#[pymethods]
impl PyQuantumState {
    /// Pure state attached to character `index` of `context`.
    #[new]
    fn new(context: &PyContext, index: usize) -> PyResult<Self> {
        Ok(Self {
            inner: opalab::quantum_state(&context.inner, index).py()?,
        })
    }

    /// Named state of a built-in model, e.g. `("qubit", "sz+")`.
    #[staticmethod]
    fn from_model(model: &str, state: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Model::builtin(model).py()?.state(state).py()?,
        })
    }

    fn expectation(&self, a: &PyObservable) -> PyResult<f64> {
        self.inner.expectation_real(&a.inner).py()
    }

    /// `[(value, probability)]` over the clustered spectrum of `a`.
    fn born_measure(&self, a: &PyObservable) -> PyResult<Vec<(f64, f64)>> {
        Ok(born_measure(&self.inner, &a.inner).py()?.distribution())
    }

    /// Values of `a` over `n` fresh sampled trials.
    #[pyo3(signature = (a, n, seed, partitions = 1))]
    fn sample(&self, a: &PyObservable, n: usize, seed: u64, partitions: usize) -> PyResult<Vec<f64>> {
        let counter = TrialCounter::default();
        let states =
            sample_relevant_set_partitioned(&self.inner, &a.inner, n, plan(seed, partitions), &counter).py()?;
        relevant_values(&states, &a.inner).py()
    }

    fn gns_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let report = gns_construct(&self.inner).py()?.report().py()?;
        to_python(py, &report)
    }

    #[getter]
    fn vector(&self) -> Vec<(f64, f64)> {
        self.inner.vector().iter().map(|z| (z.re, z.im)).collect()
    }

    fn __repr__(&self) -> String {
        format!("QuantumState(label={:?})", self.inner.label())
    }
}

/// Named observable of a built-in model.
#[pyfunction]
fn model_observable(model: &str, name: &str) -> PyResult<PyObservable> {
    Ok(PyObservable {
        inner: Model::builtin(model).py()?.observable(name).py()?.clone(),
    })
}

/// Sample mean of `a` under `state` gated against the quantum average.
#[pyfunction]
#[pyo3(signature = (state, a, n, seed, partitions = 1))]
fn verify_quantum_average<'py>(
    py: Python<'py>,
    state: &PyQuantumState,
    a: &PyObservable,
    n: usize,
    seed: u64,
    partitions: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let counter = TrialCounter::default();
    let report = verify_quantum_average_with(&state.inner, &a.inner, n, plan(seed, partitions), &counter).py()?;
    to_python(py, &report)
}

#[pyfunction]
#[pyo3(signature = (n, seed, partitions = 1))]
fn epr<'py>(py: Python<'py>, n: usize, seed: u64, partitions: usize) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &run_epr_bohm(n, plan(seed, partitions)).py()?)
}

/// CHSH run; `angles` is `(a, a', b, b')` in radians, canonical when omitted.
#[pyfunction]
#[pyo3(signature = (n, seed, angles = None, partitions = 1))]
fn chsh<'py>(
    py: Python<'py>,
    n: usize,
    seed: u64,
    angles: Option<(f64, f64, f64, f64)>,
    partitions: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let angles = match angles {
        Some((a, a_prime, b, b_prime)) => ChshAngles { a, a_prime, b, b_prime },
        None => ChshAngles::canonical(),
    };
    to_python(py, &run_chsh(angles, n, plan(seed, partitions)).py()?)
}

/// `sup Psi(R*R)^(1/2)` over the characters of `pool` and of `R*R`.
#[pyfunction]
#[pyo3(signature = (re, im = None, pool = Vec::new()))]
fn element_state_norm(
    re: Vec<Vec<f64>>,
    im: Option<Vec<Vec<f64>>>,
    pool: Vec<PyRef<'_, PyContext>>,
) -> PyResult<f64> {
    let r = element_from(re, im)?;
    let pool: Vec<Arc<MeasurementContext>> = pool.iter().map(|c| Arc::clone(&c.inner)).collect();
    state_norm(&r, &pool).py()
}

#[pyfunction]
#[pyo3(signature = (dims, trials = 50, seed = 2024))]
fn postulates<'py>(py: Python<'py>, dims: Vec<usize>, trials: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &PostulateSuite { dims, trials, seed }.run().py()?)
}

/// Observables of the truncated oscillator on `levels` number states.
#[pyfunction]
fn oscillator(levels: usize) -> PyResult<Vec<(String, PyObservable)>> {
    let model = Model::oscillator(levels).py()?;
    Ok(model
        .observables()
        .iter()
        .map(|(k, v)| (k.clone(), PyObservable { inner: v.clone() }))
        .collect())
}

#[pymodule]
#[pyo3(name = "opalab")]
fn opalab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyObservable>()?;
    m.add_class::<PyContext>()?;
    m.add_class::<PyQuantumState>()?;
    m.add_function(wrap_pyfunction!(model_observable, m)?)?;
    m.add_function(wrap_pyfunction!(verify_quantum_average, m)?)?;
    m.add_function(wrap_pyfunction!(epr, m)?)?;
    m.add_function(wrap_pyfunction!(chsh, m)?)?;
    m.add_function(wrap_pyfunction!(element_state_norm, m)?)?;
    m.add_function(wrap_pyfunction!(postulates, m)?)?;
    m.add_function(wrap_pyfunction!(oscillator, m)?)?;
    Ok(())
}
