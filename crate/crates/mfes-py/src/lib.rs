//! Python bindings: benchmark registry access, problem construction from
//! Python callables, and the solver entry point.

use std::sync::Arc;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyList, PyString};

use mfes::bench::{self, StartKind};
use mfes::problem::{EvalCounts, Evaluator, ProblemSpec};
use mfes::solver::{self, DirectionMode, RestorationClass, SolverConfig, StopReason};
use mfes::ViolationNorm;

/// Wraps a Python callable as a deterministic scalar evaluator. Exceptions
/// and non-float returns surface as NaN, which the solver treats as an
/// infinite barrier value and tallies as an evaluation error.
fn py_evaluator(callable: Py<PyAny>) -> Evaluator {
    Arc::new(move |x: &[f64]| {
        Python::attach(|py| {
            callable
                .call1(py, (x.to_vec(),))
                .and_then(|v| v.extract::<f64>(py))
                .unwrap_or(f64::NAN)
        })
    })
}

fn parse_norm(norm: &str) -> PyResult<ViolationNorm> {
    match norm.to_ascii_lowercase().as_str() {
        "l1" => Ok(ViolationNorm::L1),
        "l2sq" | "l2squared" => Ok(ViolationNorm::L2Squared),
        other => Err(PyValueError::new_err(format!(
            "unknown norm `{other}` (expected `l1` or `l2sq`)"
        ))),
    }
}

fn parse_mode(mode: &str) -> PyResult<DirectionMode> {
    match mode.to_ascii_lowercase().as_str() {
        "auto" => Ok(DirectionMode::Auto),
        "projection" => Ok(DirectionMode::Projection),
        "barrier" => Ok(DirectionMode::Barrier),
        other => Err(PyValueError::new_err(format!(
            "unknown mode `{other}` (expected `auto`, `projection`, or `barrier`)"
        ))),
    }
}

/// A constrained optimization problem: objective, relaxable inequality
/// constraints `c_i(x) <= 0`, optional relaxed equalities, and bounds.
#[pyclass(name = "Problem")]
struct PyProblem {
    spec: ProblemSpec,
    f_opt: Option<f64>,
    feasible_start: Option<Vec<f64>>,
    infeasible_start: Option<Vec<f64>>,
}

#[pymethods]
impl PyProblem {
    /// Problem(name, dimension, objective, constraints=[], equalities=[],
    ///         lower=None, upper=None, start=None, f_opt=None)
    #[new]
    #[pyo3(signature = (name, dimension, objective, constraints=None, equalities=None, lower=None, upper=None, start=None, f_opt=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: String,
        dimension: usize,
        objective: Py<PyAny>,
        constraints: Option<Vec<Py<PyAny>>>,
        equalities: Option<Vec<Py<PyAny>>>,
        lower: Option<Vec<f64>>,
        upper: Option<Vec<f64>>,
        start: Option<Vec<f64>>,
        f_opt: Option<f64>,
    ) -> PyResult<Self> {
        let mut spec = ProblemSpec::new(name, dimension, py_evaluator(objective))
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        if lower.is_some() || upper.is_some() {
            let lo = lower.unwrap_or_else(|| vec![f64::NEG_INFINITY; dimension]);
            let hi = upper.unwrap_or_else(|| vec![f64::INFINITY; dimension]);
            spec = spec
                .with_bounds(lo, hi)
                .map_err(|e| PyValueError::new_err(e.to_string()))?;
        }
        for c in constraints.unwrap_or_default() {
            spec = spec.with_constraint(py_evaluator(c));
        }
        for c in equalities.unwrap_or_default() {
            spec = spec.with_equality(py_evaluator(c), bench::EQUALITY_RELAXATION);
        }
        if let Some(x0) = start {
            spec = spec
                .with_start(x0)
                .map_err(|e| PyValueError::new_err(e.to_string()))?;
        }
        if let Some(f) = f_opt {
            spec = spec.with_best_known(f);
        }
        Ok(PyProblem {
            spec,
            f_opt,
            feasible_start: None,
            infeasible_start: None,
        })
    }

    /// A problem from the built-in benchmark registry (G1..G13, PVD, TCS,
    /// WBD), including its stored starting points and best-known value.
    #[staticmethod]
    fn benchmark(name: &str) -> PyResult<Self> {
        let entry = bench::find(name)
            .ok_or_else(|| PyKeyError::new_err(format!("unknown benchmark `{name}`")))?;
        Ok(PyProblem {
            f_opt: Some(entry.f_opt),
            feasible_start: entry.feasible_start.clone(),
            infeasible_start: entry.infeasible_start.clone(),
            spec: entry.problem,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        self.spec.name()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    #[getter]
    fn num_constraints(&self) -> usize {
        self.spec.num_relaxable()
    }

    #[getter]
    fn lower(&self) -> Vec<f64> {
        self.spec.lower().to_vec()
    }

    #[getter]
    fn upper(&self) -> Vec<f64> {
        self.spec.upper().to_vec()
    }

    #[getter]
    fn f_opt(&self) -> Option<f64> {
        self.f_opt
    }

    /// Objective value at `x` (no barrier).
    fn objective(&self, x: Vec<f64>) -> f64 {
        let mut counts = EvalCounts::default();
        self.spec.eval_objective(&x, &mut counts).value()
    }

    /// Aggregate constraint violation at `x`.
    #[pyo3(signature = (x, norm="l1"))]
    fn violation(&self, x: Vec<f64>, norm: &str) -> PyResult<f64> {
        let mut counts = EvalCounts::default();
        Ok(self.spec.eval_violation(&x, parse_norm(norm)?, &mut counts))
    }

    /// Membership in the unrelaxable region (bounds).
    fn in_bounds(&self, x: Vec<f64>) -> bool {
        self.spec.in_unrelaxable(&x)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(name={:?}, dimension={}, constraints={})",
            self.spec.name(),
            self.spec.dimension(),
            self.spec.num_relaxable()
        )
    }
}

/// Result of one solver run.
#[pyclass(name = "RunResult")]
struct PyRunResult {
    #[pyo3(get)]
    problem: String,
    #[pyo3(get)]
    seed: u64,
    /// Best point meeting the feasibility tolerance, or None.
    #[pyo3(get)]
    best_x: Option<Vec<f64>>,
    #[pyo3(get)]
    best_f: Option<f64>,
    #[pyo3(get)]
    best_g: Option<f64>,
    /// Objective evaluations spent when the best point was first attained.
    #[pyo3(get)]
    evals_at_best: Option<usize>,
    #[pyo3(get)]
    final_x: Vec<f64>,
    #[pyo3(get)]
    final_f: f64,
    #[pyo3(get)]
    final_g: f64,
    #[pyo3(get)]
    evals: usize,
    #[pyo3(get)]
    constraint_evals: usize,
    #[pyo3(get)]
    eval_errors: usize,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    restoration_entries: usize,
    #[pyo3(get)]
    sigma_min: f64,
    #[pyo3(get)]
    sigma0: f64,
    /// "budget" or "sigma-stagnation".
    #[pyo3(get)]
    stop: String,
    /// "finite-restoration", "never-left", or "infinitely-often".
    #[pyo3(get)]
    classification: String,
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!(
            "RunResult(problem={:?}, best_f={:?}, evals={}, restoration_entries={})",
            self.problem, self.best_f, self.evals, self.restoration_entries
        )
    }
}

fn resolve_start(problem: &PyProblem, start: Option<&Bound<'_, PyAny>>) -> PyResult<Vec<f64>> {
    if let Some(obj) = start {
        if let Ok(s) = obj.cast::<PyString>() {
            let kind = match s.to_str()?.to_ascii_lowercase().as_str() {
                "feasible" => StartKind::Feasible,
                "infeasible" => StartKind::Infeasible,
                "midpoint" => StartKind::Midpoint,
                other => {
                    return Err(PyValueError::new_err(format!(
                        "unknown start kind `{other}`"
                    )))
                }
            };
            let stored = match kind {
                StartKind::Feasible => problem.feasible_start.clone(),
                StartKind::Infeasible => problem.infeasible_start.clone(),
                StartKind::Midpoint => None,
            };
            if let Some(x) = stored {
                return Ok(x);
            }
            if kind != StartKind::Midpoint {
                return Err(PyValueError::new_err(format!(
                    "no stored {} start for `{}`",
                    kind.as_str(),
                    problem.spec.name()
                )));
            }
            return solver::default_start(&problem.spec)
                .map_err(|e| PyValueError::new_err(e.to_string()));
        }
        if let Ok(x) = obj.cast::<PyList>() {
            return x.extract::<Vec<f64>>();
        }
        return obj.extract::<Vec<f64>>();
    }
    if let Some(x0) = problem.spec.default_start() {
        return Ok(x0.to_vec());
    }
    solver::default_start(&problem.spec).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Minimizes `problem` from `start` (a point, a start kind string, or None
/// for the problem's default) under an objective-evaluation budget.
#[pyfunction]
#[pyo3(signature = (problem, budget=1000, seed=0, start=None, mode="auto", norm="l1", sigma0=None, generator_augmentation=false))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    problem: &PyProblem,
    budget: usize,
    seed: u64,
    start: Option<&Bound<'_, PyAny>>,
    mode: &str,
    norm: &str,
    sigma0: Option<f64>,
    generator_augmentation: bool,
) -> PyResult<PyRunResult> {
    let cfg = SolverConfig {
        budget,
        seed,
        mode: parse_mode(mode)?,
        norm: parse_norm(norm)?,
        sigma0,
        generator_augmentation,
        ..Default::default()
    };
    let x0 = resolve_start(problem, start)?;
    // detach so the evaluators can re-attach from the solver thread
    let record = py
        .detach(|| solver::solve(&problem.spec, &cfg, &x0))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;

    let classification = match record.classify() {
        RestorationClass::FiniteRestoration => "finite-restoration",
        RestorationClass::NeverLeft => "never-left",
        RestorationClass::InfinitelyOften => "infinitely-often",
    };
    Ok(PyRunResult {
        problem: record.problem.clone(),
        seed: record.seed,
        best_x: record.best_feasible.as_ref().map(|b| b.x.clone()),
        best_f: record.best_feasible.as_ref().map(|b| b.f.value()),
        best_g: record.best_feasible.as_ref().map(|b| b.g),
        evals_at_best: record.f_evals_at_best,
        final_x: record.final_iterate.x.clone(),
        final_f: record.final_iterate.f.value(),
        final_g: record.final_iterate.g,
        evals: record.f_evals,
        constraint_evals: record.c_evals,
        eval_errors: record.eval_errors,
        iterations: record.iterations,
        restoration_entries: record.restoration_entries,
        sigma_min: record.sigma_min,
        sigma0: record.sigma0,
        stop: match record.stop {
            StopReason::BudgetExhausted => "budget".to_string(),
            StopReason::SigmaStagnation => "sigma-stagnation".to_string(),
        },
        classification: classification.to_string(),
    })
}

/// Names of the built-in benchmark problems.
#[pyfunction]
fn registry() -> Vec<String> {
    bench::names()
}

/// Best-known objective value of a benchmark problem.
#[pyfunction]
fn best_known(name: &str) -> PyResult<f64> {
    bench::best_known(name).map_err(|e| PyKeyError::new_err(e.to_string()))
}

#[pymodule]
fn mfes_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(registry, m)?)?;
    m.add_function(wrap_pyfunction!(best_known, m)?)?;
    Ok(())
}
