//! Python bindings. Results come back as plain dicts/lists (decoded from the
//! same JSON the CLI emits), service models are given as dicts like
//! `{"kind": "exponential", "mu": 1.0}`.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use engine::oracle::{coeffs_closed_noqueue, coeffs_contour_with, OracleConfig, Target};
use engine::sim::{simulate as run_sim, SimConfig};
use engine::validate::validate_suite;
use engine::{asymptotics, Error, ModelParams, RetrialRate, ServiceKind, ServiceModel};

fn to_py(err: Error) -> PyErr {
    if err.is_validation() {
        PyValueError::new_err(err.to_string())
    } else {
        PyArithmeticError::new_err(err.to_string())
    }
}

fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn build(py: Python<'_>, service: &Bound<'_, PyAny>, lambda1: f64, lambda2: f64, nu: f64) -> PyResult<(ModelParams, ServiceModel)> {
    let text: String = py.import("json")?.call_method1("dumps", (service,))?.extract()?;
    let kind: ServiceKind = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("service: {e}")))?;
    let model = ServiceModel::new(kind).map_err(to_py)?;
    let nu = if nu.is_infinite() && nu > 0.0 {
        RetrialRate::Infinite
    } else if nu > 0.0 && nu.is_finite() {
        RetrialRate::Finite(nu)
    } else {
        return Err(PyValueError::new_err(format!("retrial rate must be positive, got {nu}")));
    };
    let params = ModelParams::new(lambda1, lambda2, nu, &model).map_err(to_py)?;
    Ok((params, model))
}

/// Singularity profile, regime and asymptotic laws.
#[pyfunction]
#[pyo3(signature = (service, lambda1, lambda2, nu = 1.0))]
fn analyze<'py>(py: Python<'py>, service: &Bound<'py, PyAny>, lambda1: f64, lambda2: f64, nu: f64) -> PyResult<Bound<'py, PyAny>> {
    let (params, model) = build(py, service, lambda1, lambda2, nu)?;
    let a = py.detach(|| asymptotics::analyze(&params, &model)).map_err(to_py)?;
    to_object(py, &a)
}

#[derive(Serialize)]
struct Coeffs {
    target: Target,
    method: &'static str,
    n_max: usize,
    coeffs: Vec<f64>,
    errors: Vec<f64>,
    usable: Vec<bool>,
    reach: Option<usize>,
}

/// Exact coefficients of Q, R or P2 as floats, with error bounds.
#[pyfunction]
#[pyo3(signature = (service, lambda1, lambda2, nu = 1.0, target = "P2", n_max = 100, digits = 50, closed_form = false))]
#[allow(clippy::too_many_arguments)]
fn coeffs<'py>(
    py: Python<'py>,
    service: &Bound<'py, PyAny>,
    lambda1: f64,
    lambda2: f64,
    nu: f64,
    target: &str,
    n_max: usize,
    digits: u32,
    closed_form: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let (params, model) = build(py, service, lambda1, lambda2, nu)?;
    let target: Target = target.parse().map_err(to_py)?;
    let table = py
        .detach(|| {
            if closed_form {
                coeffs_closed_noqueue(&params, &model, target, n_max)
            } else {
                coeffs_contour_with(&params, &model, target, OracleConfig::new(n_max, digits))
            }
        })
        .map_err(to_py)?;
    let out = Coeffs {
        target,
        method: if closed_form { "closed_form" } else { "contour" },
        n_max,
        coeffs: (0..=n_max).map(|n| table.coeff_f64(n)).collect(),
        errors: table.errors.iter().map(|e| e.to_f64()).collect(),
        usable: (0..=n_max).map(|n| table.usable(n)).collect(),
        reach: table.reach(),
    };
    to_object(py, &out)
}

/// Discrete-event simulation with batch-means half-widths.
#[pyfunction]
#[pyo3(signature = (service, lambda1, lambda2, nu = 1.0, seed = 1, measure_events = 10_000_000, warmup_events = None, batches = 32))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    service: &Bound<'py, PyAny>,
    lambda1: f64,
    lambda2: f64,
    nu: f64,
    seed: u64,
    measure_events: u64,
    warmup_events: Option<u64>,
    batches: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let (params, model) = build(py, service, lambda1, lambda2, nu)?;
    let mut cfg = SimConfig::new(params, model, seed);
    cfg.measure_events = measure_events;
    cfg.batches = batches;
    if let Some(w) = warmup_events {
        cfg.warmup_events = w;
    }
    let d = py.detach(|| run_sim(&cfg)).map_err(to_py)?;
    to_object(py, &d)
}

/// Built-in validation scenarios (all of them when `scenarios` is empty).
#[pyfunction]
#[pyo3(signature = (scenarios = Vec::new()))]
fn validate(py: Python<'_>, scenarios: Vec<String>) -> PyResult<Bound<'_, PyAny>> {
    let rep = py.detach(|| validate_suite(&scenarios)).map_err(to_py)?;
    to_object(py, &rep)
}

#[pymodule]
#[pyo3(name = "retrial_tails")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
