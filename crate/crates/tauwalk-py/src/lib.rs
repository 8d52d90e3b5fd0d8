//! Python bindings: partitions, potentials and the main exact/sampling routines.
//! Exact rationals come back as `fractions.Fraction`, structured results as dicts.

use num_bigint::BigInt;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use tauwalk::random_turn::ProcessSpec;
use tauwalk::report::Number;
use tauwalk::vicious::{ChainSpec, Geometry};

fn err(e: tauwalk::Error) -> PyErr {
    if e.is_bound_failure() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn number(py: Python<'_>, n: &Number) -> PyResult<Py<PyAny>> {
    match n {
        Number::Exact(q) => {
            let frac = py.import("fractions")?.getattr("Fraction")?;
            Ok(frac.call1((tauwalk::numeric::q_to_string(q),))?.unbind())
        }
        Number::Float(f) => Ok(f.into_pyobject(py)?.into_any().unbind()),
    }
}

/// Serializable results travel through JSON into plain dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.getattr("loads")?.call1((text,))?.unbind())
}

fn partition(parts: Vec<usize>) -> PyResult<tauwalk::Partition> {
    tauwalk::Partition::new(parts).map_err(err)
}

#[pyclass(name = "Partition", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyPartition {
    inner: tauwalk::Partition,
}

#[pymethods]
impl PyPartition {
    #[new]
    fn new(parts: Vec<usize>) -> PyResult<Self> {
        Ok(PyPartition { inner: partition(parts)? })
    }

    /// Parses "4,3,1"; the empty string is the zero partition.
    #[staticmethod]
    fn parse(s: &str) -> PyResult<Self> {
        Ok(PyPartition { inner: tauwalk::Partition::parse(s).map_err(err)? })
    }

    #[getter]
    fn parts(&self) -> Vec<usize> {
        self.inner.parts().to_vec()
    }

    #[getter]
    fn weight(&self) -> usize {
        self.inner.weight()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn conjugate(&self) -> Self {
        PyPartition { inner: self.inner.conjugate() }
    }

    fn diagonal(&self) -> usize {
        self.inner.diagonal()
    }

    /// Occupied sites λ_i − i + level of the first `window` particles.
    fn maya_sites(&self, level: i64, window: usize) -> PyResult<Vec<i64>> {
        Ok(tauwalk::partition::maya_from_partition(&self.inner, level, window).map_err(err)?.sites())
    }

    fn __repr__(&self) -> String {
        format!("Partition({:?})", self.inner.parts())
    }
}

#[pyclass(name = "Potential", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPotential {
    inner: tauwalk::Potential,
}

#[pymethods]
impl PyPotential {
    #[staticmethod]
    fn zero() -> Self {
        PyPotential { inner: tauwalk::Potential::zero() }
    }

    /// U_i = −i·log r.
    #[staticmethod]
    fn constant_rate(r: f64) -> PyResult<Self> {
        let inner = tauwalk::Potential::constant_rate(r);
        inner.validate().map_err(err)?;
        Ok(PyPotential { inner })
    }

    /// U_i = c·i²/2.
    #[staticmethod]
    fn gauss(c: f64) -> PyResult<Self> {
        let inner = tauwalk::Potential::gauss(c);
        inner.validate().map_err(err)?;
        Ok(PyPotential { inner })
    }

    #[staticmethod]
    fn table(base: i64, values: Vec<f64>, tail_slope: f64) -> PyResult<Self> {
        let inner = tauwalk::Potential::table(base, values, tail_slope);
        inner.validate().map_err(err)?;
        Ok(PyPotential { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: tauwalk::Potential = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(err)?;
        Ok(PyPotential { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("potentials serialize")
    }

    fn energy(&self, i: i64) -> f64 {
        self.inner.energy(i)
    }

    fn __repr__(&self) -> String {
        format!("Potential({})", self.to_json())
    }
}

fn spec(potential: Option<&PyPotential>, steps: usize, qsq: f64, seed: u64) -> ProcessSpec {
    let u = potential.map_or_else(tauwalk::Potential::zero, |p| p.inner.clone());
    ProcessSpec::new(u, steps).with_qsq(qsq).with_seed(seed)
}

/// N_{λ,0}(T): number of duration-T walks from the empty diagram to λ.
#[pyfunction]
fn path_count(parts: Vec<usize>, steps: usize) -> PyResult<BigInt> {
    Ok(BigInt::from(tauwalk::random_turn::path_count(&partition(parts)?, steps)))
}

/// Z0(T), exact when the potential allows it.
#[pyfunction]
#[pyo3(signature = (steps, potential=None, qsq=0.0))]
fn normalization_z0(py: Python<'_>, steps: usize, potential: Option<&PyPotential>, qsq: f64) -> PyResult<Py<PyAny>> {
    let z = tauwalk::random_turn::normalization_Z0(&spec(potential, steps, qsq, 0)).map_err(err)?;
    number(py, &z)
}

/// Every endpoint with its weight and probability.
#[pyfunction]
#[pyo3(signature = (steps, potential=None, qsq=0.0))]
fn exact_distribution(py: Python<'_>, steps: usize, potential: Option<&PyPotential>, qsq: f64) -> PyResult<Py<PyAny>> {
    let d = tauwalk::random_turn::exact_distribution(&spec(potential, steps, qsq, 0)).map_err(err)?;
    to_py(py, &d)
}

#[pyfunction]
#[pyo3(signature = (steps, samples, potential=None, seed=0))]
fn sample_endpoint(py: Python<'_>, steps: usize, samples: usize, potential: Option<&PyPotential>, seed: u64) -> PyResult<Py<PyAny>> {
    let rep = py.detach(|| tauwalk::random_turn::sample_endpoint(&spec(potential, steps, 0.0, seed), samples)).map_err(err)?;
    to_py(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (rate, steps, qsq=0.0))]
fn predict_limit_shape(py: Python<'_>, rate: f64, steps: usize, qsq: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &tauwalk::random_turn::predict_limit_shape(rate, steps, qsq).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (steps, potential=None, qsq=0.0, restarts=8, seed=0))]
fn mode_search(py: Python<'_>, steps: usize, potential: Option<&PyPotential>, qsq: f64, restarts: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let s = spec(potential, steps, qsq, seed);
    let m = py.detach(|| tauwalk::random_turn::mode_search(&s, restarts)).map_err(err)?;
    to_py(py, &m)
}

/// s_λ(t_∞) = d(λ)/|λ|!.
#[pyfunction]
fn schur_tinfty(py: Python<'_>, parts: Vec<usize>) -> PyResult<Py<PyAny>> {
    number(py, &Number::Exact(tauwalk::schur::schur_tinfty(&partition(parts)?)))
}

#[pyfunction]
fn skew_schur_tinfty(py: Python<'_>, outer: Vec<usize>, inner: Vec<usize>) -> PyResult<Py<PyAny>> {
    let t = tauwalk::schur::TimeVector::t_infinity();
    number(py, &Number::Exact(tauwalk::schur::skew_schur(&partition(outer)?, &partition(inner)?, &t)))
}

/// det(e^{U_{s_i} − U_{s'_j}}/(s'_j − s_i)!) on the ℓ(λ') window.
#[pyfunction]
#[pyo3(signature = (lambda_prime, lambda_, potential=None))]
fn wick_transition(py: Python<'_>, lambda_prime: Vec<usize>, lambda_: Vec<usize>, potential: Option<&PyPotential>) -> PyResult<Py<PyAny>> {
    let u = potential.map_or_else(tauwalk::Potential::zero, |p| p.inner.clone());
    number(py, &tauwalk::vicious::wick_transition(&partition(lambda_prime)?, &partition(lambda_)?, &u))
}

#[pyfunction]
fn binomial_determinant(a: Vec<i64>, b: Vec<i64>) -> PyResult<BigInt> {
    tauwalk::vicious::binomial_determinant(&a, &b).map_err(err)
}

#[pyfunction]
fn nonintersecting_path_count(a: Vec<i64>, b: Vec<i64>) -> PyResult<BigInt> {
    tauwalk::vicious::nonintersecting_path_count(&a, &b).map_err(err)
}

/// Vicious-walker chain weight between strictly decreasing site lists.
#[pyfunction]
#[pyo3(signature = (start, end, steps, potential=None, ring=None))]
fn chain_weight(py: Python<'_>, start: Vec<i64>, end: Vec<i64>, steps: usize, potential: Option<&PyPotential>, ring: Option<usize>) -> PyResult<Py<PyAny>> {
    let u = potential.map_or_else(tauwalk::Potential::zero, |p| p.inner.clone());
    let chain = ChainSpec::uniform(start.len(), steps, u, ring.map_or(Geometry::HalfLine, Geometry::Ring));
    let w = tauwalk::vicious::chain_weight_sites(&start, &end, &chain).map_err(err)?;
    number(py, &w.weight)
}

/// e^{−U_λ}·s_λ(x_1, …, x_T).
#[pyfunction]
#[pyo3(signature = (parts, x, potential=None))]
fn growth_weight(parts: Vec<usize>, x: Vec<f64>, potential: Option<&PyPotential>) -> PyResult<f64> {
    let u = potential.map_or_else(tauwalk::Potential::zero, |p| p.inner.clone());
    Ok(tauwalk::layering::growth_weight(&partition(parts)?, &x, &u))
}

/// Runs the command-line interface in-process and returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    py.detach(|| tauwalk::cli::run(std::iter::once("tau-walk".to_string()).chain(args)))
}

#[pymodule]
fn tauwalk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPartition>()?;
    m.add_class::<PyPotential>()?;
    m.add_function(wrap_pyfunction!(path_count, m)?)?;
    m.add_function(wrap_pyfunction!(normalization_z0, m)?)?;
    m.add_function(wrap_pyfunction!(exact_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(sample_endpoint, m)?)?;
    m.add_function(wrap_pyfunction!(predict_limit_shape, m)?)?;
    m.add_function(wrap_pyfunction!(mode_search, m)?)?;
    m.add_function(wrap_pyfunction!(schur_tinfty, m)?)?;
    m.add_function(wrap_pyfunction!(skew_schur_tinfty, m)?)?;
    m.add_function(wrap_pyfunction!(wick_transition, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_determinant, m)?)?;
    m.add_function(wrap_pyfunction!(nonintersecting_path_count, m)?)?;
    m.add_function(wrap_pyfunction!(chain_weight, m)?)?;
    m.add_function(wrap_pyfunction!(growth_weight, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
