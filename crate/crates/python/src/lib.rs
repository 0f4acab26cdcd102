//! Python bindings: load problems, run both solver modes and the verification
//! suites. Structured results are returned as plain dicts and lists.

use std::str::FromStr;

use dcmip::corpus;
use dcmip::io::{trace_to_string, ProblemDoc};
use dcmip::verify::{run_suite, Suite};
use dcmip::{run_scmip, run_smoothing_scmip, Error, MidcProblem, Mode};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::{json, Value};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Subproblem(_) | Error::NodeLimit { .. } | Error::Budget(_) | Error::Io(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

/// A mixed-integer DC program `min g(x) − h(x)` over a polyhedron.
#[pyclass(name = "Problem", module = "dcmip_py", frozen)]
struct PyProblem {
    doc: ProblemDoc,
    problem: MidcProblem,
}

impl PyProblem {
    fn from_doc(doc: ProblemDoc) -> PyResult<Self> {
        let problem = doc.to_problem().map_err(py_err)?;
        Ok(PyProblem { doc, problem })
    }
}

#[pymethods]
impl PyProblem {
    /// Parses a problem document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::from_doc(ProblemDoc::parse(text).map_err(py_err)?)
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        Self::from_json(&text)
    }

    /// One of the bundled instances, see `corpus_names()`.
    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        Self::from_doc(corpus::load(name).map_err(py_err)?)
    }

    fn to_json(&self) -> String {
        self.doc.to_text()
    }

    #[getter]
    fn name(&self) -> Option<String> {
        self.doc.name.clone()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.problem.dim()
    }

    #[getter]
    fn integer(&self) -> Vec<usize> {
        self.problem.integers().to_vec()
    }

    /// `g(x) − h(x)`.
    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        self.problem.objective(&x).map_err(py_err)
    }

    fn is_feasible(&self, x: Vec<f64>, tol: f64) -> bool {
        self.problem.is_feasible(&x, tol)
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let r = self.problem.validate().map_err(py_err)?;
        let v = json!({
            "dimension": self.problem.dim(),
            "integer": self.problem.integers(),
            "relaxation_point": r.relaxation_point,
            "feasible_point": r.feasible_point,
            "tau_h": r.tau_h,
            "kappa_h": self.problem.h().kappa_bound(),
            "warnings": r.warnings,
        });
        to_py(py, &v)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(name={:?}, dimension={}, integer={:?})",
            self.doc.name.as_deref().unwrap_or(""),
            self.problem.dim(),
            self.problem.integers()
        )
    }
}

/// Runs SCMIP (`mode="scmip"`) or Smoothing SCMIP (`mode="smoothing"`).
/// Unset options fall back to the problem's solver block, then to the mode
/// defaults. The returned dict carries the NDJSON trace under `"trace"`.
#[pyfunction]
#[pyo3(signature = (problem, mode = "scmip", x0 = None, rho = None, gamma = None, mu0 = None, max_iter = None))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    mode: &str,
    x0: Option<Vec<f64>>,
    rho: Option<f64>,
    gamma: Option<f64>,
    mu0: Option<(f64, f64)>,
    max_iter: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = match mode {
        "scmip" => Mode::Scmip,
        "smoothing" => Mode::Smoothing,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let mut cfg = problem.doc.solver_config(mode);
    if x0.is_some() {
        cfg.x0 = x0;
    }
    if let Some(r) = rho {
        cfg.rho = r;
    }
    if let Some(g) = gamma {
        cfg.gamma = g;
    }
    if let Some((a, b)) = mu0 {
        cfg.mu0 = [a, b];
    }
    if let Some(k) = max_iter {
        cfg.max_iter = k;
    }
    let p = &problem.problem;
    let outcome = py
        .detach(|| match mode {
            Mode::Scmip => run_scmip(p, &cfg),
            Mode::Smoothing => run_smoothing_scmip(p, &cfg),
        })
        .map_err(py_err)?;
    let v = json!({
        "mode": mode,
        "status": outcome.status,
        "x": outcome.x,
        "f": outcome.objective,
        "residual": outcome.residual,
        "iterations": outcome.trace.records.len(),
        "plateau_start": outcome.plateau_start,
        "message": outcome.trace.terminal.message,
        "trace": trace_to_string(&outcome.trace),
    });
    to_py(py, &v)
}

/// Runs a seeded verification suite and returns its report.
#[pyfunction]
#[pyo3(signature = (suite, seed = 7, count = 100))]
fn verify<'py>(
    py: Python<'py>,
    suite: &str,
    seed: u64,
    count: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let suite = Suite::from_str(suite).map_err(py_err)?;
    let report = py.detach(|| run_suite(suite, seed, count));
    let v = serde_json::to_value(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

#[pyfunction]
fn corpus_names() -> Vec<&'static str> {
    corpus::NAMES.to_vec()
}

#[pymodule]
fn dcmip_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_names, m)?)?;
    Ok(())
}
