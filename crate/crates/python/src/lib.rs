//! Python bindings: experiment runs, the Space Saving sketch, the power-law
//! fit and the error metrics.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use skewsim::domain::{hash_key, SimTime};
use skewsim::eval::{self, ExperimentConfig, ExperimentOutput};
use skewsim::regression::{self, PointSet};
use skewsim::sketch;
use skewsim::workload::{self, SkewSpec};
use skewsim::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Validation { .. } | Error::Parse(_) | Error::InvalidArgument(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// An experiment configuration (the JSON document the CLI reads).
#[pyclass(module = "skewsim", frozen)]
struct Experiment {
    cfg: ExperimentConfig,
}

#[pymethods]
impl Experiment {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ExperimentConfig::from_json(text)
            .map(|cfg| Self { cfg })
            .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ExperimentConfig::load(&path)
            .map(|cfg| Self { cfg })
            .map_err(py_err)
    }

    /// Copy with a dotted field replaced. `value` is read as JSON, falling
    /// back to a plain string.
    fn with_override(&self, field: &str, value: &str) -> PyResult<Self> {
        let value = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        self.cfg
            .with_override(field, value)
            .map(|cfg| Self { cfg })
            .map_err(py_err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.cfg.name
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    fn to_json(&self) -> PyResult<String> {
        self.cfg.to_json().map_err(py_err)
    }

    /// Simulates and replays; releases the GIL while running.
    fn run(&self, py: Python<'_>) -> PyResult<ExperimentResult> {
        let cfg = self.cfg.clone();
        py.detach(move || eval::run_experiment(&cfg))
            .map(|out| ExperimentResult { out })
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Experiment(name={:?}, seed={})", self.cfg.name, self.cfg.seed)
    }
}

#[pyclass(module = "skewsim", frozen)]
struct ExperimentResult {
    out: ExperimentOutput,
}

#[pymethods]
impl ExperimentResult {
    #[getter]
    fn indicators(&self) -> Vec<String> {
        self.out.series.iter().map(|s| s.indicator.clone()).collect()
    }

    #[getter]
    fn reduce_start(&self) -> u64 {
        self.out.trace.reduce_start().0
    }

    #[getter]
    fn job_end(&self) -> u64 {
        self.out.trace.job_end().0
    }

    /// One dict per indicator with avg_err, max_err, overhead and profile sizes.
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.out
            .summary
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("indicator", &r.indicator)?;
                d.set_item("avg_err", r.avg_err)?;
                d.set_item("max_err", r.max_err)?;
                d.set_item("overhead", r.overhead)?;
                d.set_item("map_profile_bytes", r.map_profile_bytes)?;
                d.set_item("reduce_profile_bytes", r.reduce_profile_bytes)?;
                Ok(d)
            })
            .collect()
    }

    /// `(t_ms, estimated, optimal)` triples for one indicator.
    fn series(&self, indicator: &str) -> PyResult<Vec<(u64, f64, f64)>> {
        let s = self
            .out
            .series
            .iter()
            .find(|s| s.indicator == indicator)
            .ok_or_else(|| PyValueError::new_err(format!("no indicator named {indicator:?}")))?;
        Ok(s.points.iter().map(|p| (p.t.0, p.estimated, p.optimal)).collect())
    }

    fn trace_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.out.trace).map_err(|e| py_err(e.into()))
    }

    /// Writes the CSV and SVG reports; returns the file paths.
    fn write_reports(&self, dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        eval::emit_reports(&self.out, &dir).map_err(py_err)
    }
}

/// Weighted Space Saving over integer keys.
#[pyclass(module = "skewsim", name = "SpaceSaving")]
struct PySpaceSaving {
    inner: sketch::SpaceSaving<u64>,
}

#[pymethods]
impl PySpaceSaving {
    #[new]
    fn new(capacity: usize) -> PyResult<Self> {
        sketch::SpaceSaving::new(capacity)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[pyo3(signature = (key, weight = 1))]
    fn offer(&mut self, key: u64, weight: u64) {
        self.inner.offer(key, weight);
    }

    /// `(estimate, error)` for a tracked key, `None` otherwise.
    fn get(&self, key: u64) -> Option<(u64, u64)> {
        self.inner.get(&key).map(|c| (c.estimate, c.error))
    }

    /// The `k` heaviest keys as `(key, estimate, error)`.
    fn heavy(&self, k: usize) -> PyResult<Vec<(u64, u64, u64)>> {
        let top = self.inner.heavy(k).map_err(py_err)?;
        Ok(top.into_iter().map(|(key, c)| (key, c.estimate, c.error)).collect())
    }

    #[getter]
    fn total_weight(&self) -> u64 {
        self.inner.total_weight()
    }

    #[getter]
    fn capacity(&self) -> usize {
        self.inner.capacity()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Fits `a + b * x^c` to `(size, ms)` pairs. Returns a dict with a, b, c and
/// r2, or `None` with fewer than three distinct sizes.
#[pyfunction]
fn fit_power<'py>(py: Python<'py>, points: Vec<(u64, f64)>) -> PyResult<Option<Bound<'py, PyDict>>> {
    let Some(fit) = regression::fit_power(&PointSet::from_pairs(&points)) else {
        return Ok(None);
    };
    let d = PyDict::new(py);
    d.set_item("a", fit.a)?;
    d.set_item("b", fit.b)?;
    d.set_item("c", fit.c)?;
    d.set_item("r2", fit.r2)?;
    Ok(Some(d))
}

/// σ-skew key groups as `(key, size_bytes)`, largest first.
#[pyfunction]
#[pyo3(signature = (sigma, n_max, total_budget = None))]
fn gen_sigma_skew(sigma: f64, n_max: u64, total_budget: Option<u64>) -> PyResult<Vec<(u64, u64)>> {
    let groups = workload::gen_sigma_skew(&SkewSpec {
        sigma,
        n_max,
        total_budget,
    })
    .map_err(py_err)?;
    Ok(groups.iter().map(|g| (g.key.0, g.size_bytes)).collect())
}

#[pyfunction(name = "hash_key")]
fn py_hash_key(key: &[u8]) -> PyResult<u64> {
    hash_key(key).map(|k| k.0).map_err(py_err)
}

/// Absolute difference between estimated and optimal progress, in points.
#[pyfunction]
fn error_at(est_end: f64, true_end: f64, t: u64, t_start: u64) -> PyResult<f64> {
    eval::error_at(est_end, true_end, SimTime(t), SimTime(t_start)).map_err(py_err)
}

/// `(avg, max)` of an error series.
#[pyfunction]
fn summarize(errors: Vec<f64>) -> PyResult<(f64, f64)> {
    eval::summarize(&errors).map(|s| (s.avg, s.max)).map_err(py_err)
}

/// Profile bytes as a percentage of shuffle bytes.
#[pyfunction]
fn overhead(map_profile_bytes: u64, reduce_profile_bytes: u64, shuffle_bytes: u64) -> PyResult<f64> {
    eval::overhead(map_profile_bytes, reduce_profile_bytes, shuffle_bytes)
        .map(|o| o.overhead_pct)
        .map_err(py_err)
}

#[pymodule]
#[pyo3(name = "skewsim")]
fn skewsim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Experiment>()?;
    m.add_class::<ExperimentResult>()?;
    m.add_class::<PySpaceSaving>()?;
    m.add_function(wrap_pyfunction!(fit_power, m)?)?;
    m.add_function(wrap_pyfunction!(gen_sigma_skew, m)?)?;
    m.add_function(wrap_pyfunction!(py_hash_key, m)?)?;
    m.add_function(wrap_pyfunction!(error_at, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(overhead, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
