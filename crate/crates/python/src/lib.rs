// SPDX-License-Identifier: Apache-2.0

//! Python bindings. Environments and tables are classes; structured results
//! (reports, ensembles) come back as plain dicts.
//!
//! Magnitudes that can exceed `f64` are exchanged as natural logs: `ln_n`
//! arguments and `ln_*` return values. A zero result is `-inf`.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use strata_walk::analysis::{
    self, balanced_window, build_tables, classify_tables, GridSpec, PhiKind, PotentialTables, Thresholds,
};
use strata_walk::environment::{build_environment, validate_hypothesis, DriftModel, EnvironmentModel, EnvironmentView};
use strata_walk::montecarlo::{self, EnsembleSpec, WalkMode};
use strata_walk::{rng, Error, SignedLog};

create_exception!(strata_walk, WindowError, PyRuntimeError, "Query outside the tabulated window.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::OutOfWindow { .. } | Error::WindowTooLarge { .. } | Error::Insufficient(_) => {
            WindowError::new_err(e.to_string())
        }
        Error::Io(_) | Error::Overflow { .. } | Error::BruteForceCap { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Serializes through JSON into Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn ln_of(x: SignedLog) -> PyResult<f64> {
    if x.sign() == strata_walk::Sign::Neg {
        return Err(PyValueError::new_err("negative value has no real logarithm"));
    }
    Ok(x.lmag())
}

fn kind(name: &str) -> PyResult<PhiKind> {
    match name {
        "phi" => Ok(PhiKind::Phi),
        "phi_plus" => Ok(PhiKind::PhiPlus),
        "phi_str" => Ok(PhiKind::PhiStr),
        _ => Err(PyValueError::new_err(format!("unknown function {name:?}; use phi, phi_plus or phi_str"))),
    }
}

/// A realized stratified environment.
#[pyclass(name = "Environment", module = "strata_walk", frozen)]
struct PyEnvironment {
    view: EnvironmentView,
}

#[pymethods]
impl PyEnvironment {
    /// From an environment JSON document.
    #[new]
    fn new(model_json: &str) -> PyResult<Self> {
        let model: EnvironmentModel =
            serde_json::from_str(model_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyEnvironment { view: build_environment(model).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (eta=0.2))]
    fn flat(eta: f64) -> PyResult<Self> {
        Ok(PyEnvironment { view: build_environment(EnvironmentModel::flat(eta)).map_err(py_err)? })
    }

    /// Two-point ratio law `{a, 1/a}`, optionally with drift `c·exp(-|n|^alpha)`.
    #[staticmethod]
    #[pyo3(signature = (a=2.0, eta=0.2, seed=0, alpha=None, c=1.0))]
    fn sinai(a: f64, eta: f64, seed: u64, alpha: Option<f64>, c: f64) -> PyResult<Self> {
        let mut m = EnvironmentModel::sinai(a, eta, seed);
        if let Some(alpha) = alpha {
            m = m.with_drift(DriftModel::stretch_exp(c, alpha));
        }
        Ok(PyEnvironment { view: build_environment(m).map_err(py_err)? })
    }

    fn model_json(&self) -> String {
        serde_json::to_string(self.view.model()).expect("model serializes")
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.view.model().seed
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.view.eta()
    }

    /// `(p, q, r, eps)` at level `n`; `eps` is a list of length `d`.
    fn stratum(&self, n: i64) -> (f64, f64, f64, Vec<f64>) {
        let s = self.view.stratum(n);
        (s.p, s.q, s.r, s.eps.clone())
    }

    fn validate<'py>(&self, py: Python<'py>, n_lo: i64, n_hi: i64) -> PyResult<Bound<'py, PyAny>> {
        let r = validate_hypothesis(&self.view, n_lo, n_hi).map_err(py_err)?;
        to_py(py, &r)
    }

    fn __repr__(&self) -> String {
        format!("Environment({})", self.model_json())
    }
}

/// Potential and dispersion tables on a level window.
#[pyclass(name = "Tables", module = "strata_walk", frozen)]
struct PyTables {
    tables: PotentialTables,
    centered: bool,
}

#[pymethods]
impl PyTables {
    #[new]
    fn new(py: Python<'_>, env: &PyEnvironment, n_minus: usize, n_plus: usize) -> PyResult<Self> {
        let view = &env.view;
        let tables = py.detach(|| build_tables(view, n_minus, n_plus)).map_err(py_err)?;
        Ok(PyTables { tables, centered: !view.model().is_biased() })
    }

    /// Window of `levels` levels split between the sides to reach the
    /// largest common scale.
    #[staticmethod]
    fn balanced(py: Python<'_>, env: &PyEnvironment, levels: usize) -> PyResult<Self> {
        let view = &env.view;
        let tables =
            py.detach(|| balanced_window(view, levels).and_then(|(m, n)| build_tables(view, m, n))).map_err(py_err)?;
        Ok(PyTables { tables, centered: !view.model().is_biased() })
    }

    #[getter]
    fn window(&self) -> (i64, i64) {
        self.tables.window()
    }

    fn log_rho(&self, k: i64) -> PyResult<f64> {
        let (lo, hi) = self.tables.window();
        if k < lo || k > hi {
            return Err(WindowError::new_err(format!("level {k} outside [{lo}, {hi}]")));
        }
        Ok(self.tables.log_rho(k))
    }

    /// `ln Φ_str(n)`.
    #[pyo3(signature = (n=None, ln_n=None))]
    fn phi_str(&self, n: Option<u64>, ln_n: Option<f64>) -> PyResult<f64> {
        ln_of(analysis::phi_str(&self.tables, arg(n, ln_n)?).map_err(py_err)?)
    }

    /// `ln Φ(n)`.
    #[pyo3(signature = (n=None, ln_n=None))]
    fn phi(&self, n: Option<u64>, ln_n: Option<f64>) -> PyResult<f64> {
        ln_of(analysis::phi_sym(&self.tables, arg(n, ln_n)?).map_err(py_err)?)
    }

    /// `ln Φ_+(n)`.
    #[pyo3(signature = (n=None, ln_n=None))]
    fn phi_plus(&self, n: Option<u64>, ln_n: Option<f64>) -> PyResult<f64> {
        ln_of(analysis::phi_plus(&self.tables, arg(n, ln_n)?).map_err(py_err)?)
    }

    /// `ln Φ(-m, n)`.
    fn phi_range(&self, m: u64, n: u64) -> PyResult<f64> {
        let r = analysis::phi_range(&self.tables, SignedLog::from_u64(m), SignedLog::from_u64(n));
        ln_of(r.map_err(py_err)?)
    }

    /// `ln Φ(-m, n)` by direct double summation (small ranges only).
    fn phi_brute(&self, m: u64, n: u64) -> PyResult<f64> {
        let r = analysis::phi_brute(&self.tables, SignedLog::from_u64(m), SignedLog::from_u64(n));
        ln_of(r.map_err(py_err)?)
    }

    /// `ln f⁻¹(e^ln_x)` for `f` in `phi`, `phi_plus`, `phi_str`.
    fn inverse(&self, which: &str, ln_x: f64) -> PyResult<f64> {
        let r = analysis::phi_inverse(&self.tables, SignedLog::from_log(ln_x), kind(which)?);
        ln_of(r.map_err(py_err)?)
    }

    /// Criterion series and verdict as a dict.
    #[pyo3(signature = (k=None, j_max=None, theta_trans=None, theta_rec=None))]
    fn classify<'py>(
        &self,
        py: Python<'py>,
        k: Option<u64>,
        j_max: Option<u32>,
        theta_trans: Option<f64>,
        theta_rec: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let grid = match (k, j_max) {
            (Some(k), Some(j)) => Some(GridSpec::new(k, j).map_err(py_err)?),
            (None, None) => None,
            _ => return Err(PyValueError::new_err("give both k and j_max, or neither")),
        };
        let mut th = Thresholds::default();
        th.theta_trans = theta_trans.unwrap_or(th.theta_trans);
        th.theta_rec = theta_rec.unwrap_or(th.theta_rec);
        let t = &self.tables;
        let centered = self.centered;
        let c = py.detach(|| classify_tables(t, centered, grid, th)).map_err(py_err)?;
        to_py(py, &c)
    }

    fn check_invariants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.tables.check_invariants())
    }
}

fn arg(n: Option<u64>, ln_n: Option<f64>) -> PyResult<SignedLog> {
    match (n, ln_n) {
        (Some(n), None) => Ok(SignedLog::from_u64(n)),
        (None, Some(l)) => Ok(SignedLog::from_log(l)),
        _ => Err(PyValueError::new_err("give exactly one of n, ln_n")),
    }
}

/// Verdict for an environment on a balanced window of `levels` levels.
#[pyfunction]
#[pyo3(signature = (env, levels=100_000))]
fn classify<'py>(py: Python<'py>, env: &PyEnvironment, levels: usize) -> PyResult<Bound<'py, PyAny>> {
    let view = &env.view;
    let c = py
        .detach(|| analysis::classify(view, analysis::WindowSpec::Balanced { levels }, None, Thresholds::default()))
        .map_err(py_err)?;
    to_py(py, &c)
}

/// Ensemble of walks; per-walk stats and aggregates as a dict.
#[pyfunction]
#[pyo3(signature = (env, walks, steps, base_seed=0, record_trace=false, vertical=false, threads=None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    env: &PyEnvironment,
    walks: usize,
    steps: u64,
    base_seed: u64,
    record_trace: bool,
    vertical: bool,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = if vertical { WalkMode::Vertical } else { WalkMode::Full };
    let spec = EnsembleSpec { walks, steps, base_seed, record_trace, mode };
    let view = &env.view;
    let r = py.detach(|| montecarlo::ensemble(view, spec, threads)).map_err(py_err)?;
    to_py(py, &r)
}

/// One walk of `steps` transitions from the origin with the given seed.
#[pyfunction]
#[pyo3(signature = (env, steps, seed, record_trace=false))]
fn walk<'py>(
    py: Python<'py>,
    env: &PyEnvironment,
    steps: u64,
    seed: u64,
    record_trace: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let view = &env.view;
    let s = py.detach(|| montecarlo::run_walk(view, steps, &mut rng::walk_stream(seed), record_trace));
    to_py(py, &s)
}

#[pymodule]
#[pyo3(name = "strata_walk")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnvironment>()?;
    m.add_class::<PyTables>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(walk, m)?)?;
    m.add("WindowError", m.py().get_type::<WindowError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
