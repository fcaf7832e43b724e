//! Python bindings: `import pygrpsel`.

use grpsel::lab::{run_experiment as run_lab, ExperimentConfig};
use grpsel::path::path_lambda_max;
use grpsel::{
    build_grouped_design, fit_path, fit_penalized, kfold_cv, standardization_for, Error, FitResult, GroupedDesign,
    PathOptions, PenaltyFamily, PenaltySpec, ScenarioName, ScenarioSpec, SolverOptions, WeightRule,
};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::MaxIterExceeded { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn family(name: &str) -> PyResult<PenaltyFamily> {
    name.parse::<PenaltyFamily>().map_err(to_py)
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("x must be a rectangular list of rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), p, |i, k| rows[i][k]))
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn solver(tol: f64, max_iter: usize) -> SolverOptions {
    SolverOptions { tol, max_iter, ..Default::default() }
}

/// Standardized grouped design bound to one penalty family.
#[pyclass(name = "Design", module = "pygrpsel")]
struct PyDesign {
    inner: GroupedDesign,
    family: PenaltyFamily,
}

#[pymethods]
impl PyDesign {
    #[new]
    #[pyo3(signature = (x, y, groups, penalty = "glasso", weights = None, weight_power = None))]
    fn new(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        groups: Vec<i64>,
        penalty: &str,
        weights: Option<Vec<f64>>,
        weight_power: Option<f64>,
    ) -> PyResult<Self> {
        let family = family(penalty)?;
        let rule = match (weights, weight_power) {
            (Some(w), _) => WeightRule::Custom(w),
            (None, Some(g)) => WeightRule::DjPow(g),
            (None, None) => WeightRule::SqrtDj,
        };
        let inner = build_grouped_design(&matrix(&x)?, &y, &groups, rule, standardization_for(family)).map_err(to_py)?;
        Ok(PyDesign { inner, family })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn n_groups(&self) -> usize {
        self.inner.n_groups()
    }

    #[getter]
    fn penalty(&self) -> String {
        self.family.to_string()
    }

    #[getter]
    fn group_labels(&self) -> Vec<i64> {
        self.inner.group_labels().to_vec()
    }

    /// Smallest lambda with an all-zero solution.
    #[pyo3(signature = (gamma = None, sgl_ratio = 1.0))]
    fn lambda_max(&self, gamma: Option<f64>, sgl_ratio: f64) -> PyResult<f64> {
        let spec = PenaltySpec::for_family(self.family, 1.0, gamma, sgl_ratio).map_err(to_py)?;
        path_lambda_max(&self.inner, &spec, &SolverOptions::default()).map_err(to_py)
    }

    /// Group 2-norms of an original-scale coefficient vector.
    fn group_norms(&self, beta: Vec<f64>) -> PyResult<Vec<f64>> {
        if beta.len() != self.inner.p() {
            return Err(to_py(Error::DimensionMismatch { expected: self.inner.p(), got: beta.len() }));
        }
        Ok(self.inner.original_group_norms(&beta))
    }

    fn __repr__(&self) -> String {
        format!("Design(n={}, p={}, groups={}, penalty='{}')", self.inner.n(), self.inner.p(), self.inner.n_groups(), self.family)
    }
}

#[pyclass(name = "Fit", module = "pygrpsel", frozen)]
struct PyFit {
    #[pyo3(get)]
    beta: Vec<f64>,
    #[pyo3(get)]
    intercept: f64,
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    lam: f64,
    #[pyo3(get)]
    gamma: f64,
    #[pyo3(get)]
    n_nonzero: usize,
}

impl PyFit {
    fn from_fit(d: &GroupedDesign, f: &FitResult) -> Self {
        let intercept = d.y_mean() - d.x_means().iter().zip(&f.beta).map(|(m, b)| m * b).sum::<f64>();
        PyFit {
            beta: f.beta.clone(),
            intercept,
            objective: f.objective,
            iterations: f.iterations,
            converged: f.converged,
            lam: f.lambda(),
            gamma: f.gamma(),
            n_nonzero: f.n_nonzero(),
        }
    }
}

#[pymethods]
impl PyFit {
    fn __repr__(&self) -> String {
        let conv = if self.converged { "True" } else { "False" };
        format!("Fit(lam={}, gamma={}, n_nonzero={}, converged={conv})", self.lam, self.gamma, self.n_nonzero)
    }
}

#[pyclass(name = "Path", module = "pygrpsel", frozen)]
struct PyPath {
    #[pyo3(get)]
    lambda_max: f64,
    #[pyo3(get)]
    lambdas: Vec<f64>,
    #[pyo3(get)]
    gammas: Vec<f64>,
    /// One row per (gamma, lambda) pair, gamma-major.
    #[pyo3(get)]
    betas: Vec<Vec<f64>>,
    #[pyo3(get)]
    group_norms: Vec<Vec<f64>>,
    #[pyo3(get)]
    converged: Vec<bool>,
}

/// Fit at a single lambda.
#[pyfunction]
#[pyo3(signature = (design, lam, gamma = None, sgl_ratio = 1.0, tol = 1e-7, max_iter = 10_000))]
fn fit(design: &PyDesign, lam: f64, gamma: Option<f64>, sgl_ratio: f64, tol: f64, max_iter: usize) -> PyResult<PyFit> {
    let spec = PenaltySpec::for_family(design.family, lam, gamma, sgl_ratio).map_err(to_py)?;
    let f = fit_penalized(&design.inner, &spec, None, &solver(tol, max_iter)).map_err(to_py)?;
    Ok(PyFit::from_fit(&design.inner, &f))
}

fn path_options(gammas: Option<Vec<f64>>, nlambda: usize, lambda_min_ratio: Option<f64>, tol: f64, max_iter: usize) -> PathOptions {
    PathOptions {
        n_lambda: nlambda,
        lambda_min_ratio,
        gamma_grid: gammas.unwrap_or_default(),
        solver: solver(tol, max_iter),
        ..Default::default()
    }
}

/// Warm-started solution path on a descending lambda grid.
#[pyfunction]
#[pyo3(signature = (design, gammas = None, nlambda = 100, lambda_min_ratio = None, sgl_ratio = 1.0, tol = 1e-7, max_iter = 10_000))]
fn path(
    design: &PyDesign,
    gammas: Option<Vec<f64>>,
    nlambda: usize,
    lambda_min_ratio: Option<f64>,
    sgl_ratio: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<PyPath> {
    let first = gammas.as_ref().and_then(|g| g.first().copied());
    let spec = PenaltySpec::for_family(design.family, 1.0, first, sgl_ratio).map_err(to_py)?;
    let p = fit_path(&design.inner, &spec, &path_options(gammas, nlambda, lambda_min_ratio, tol, max_iter)).map_err(to_py)?;
    Ok(PyPath {
        lambda_max: p.lambda_max,
        group_norms: p.fits.iter().map(|f| design.inner.original_group_norms(&f.beta)).collect(),
        betas: p.fits.iter().map(|f| f.beta.clone()).collect(),
        converged: p.fits.iter().map(|f| f.converged).collect(),
        lambdas: p.lambdas,
        gammas: p.gammas,
    })
}

/// K-fold cross-validation; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (design, folds = 10, seed = 1, gammas = None, nlambda = 100, lambda_min_ratio = None, sgl_ratio = 1.0))]
#[allow(clippy::too_many_arguments)]
fn cv(
    py: Python<'_>,
    design: &PyDesign,
    folds: usize,
    seed: u64,
    gammas: Option<Vec<f64>>,
    nlambda: usize,
    lambda_min_ratio: Option<f64>,
    sgl_ratio: f64,
) -> PyResult<Py<PyAny>> {
    let gammas = gammas.unwrap_or_else(|| grpsel::default_gamma_grid(design.family));
    let spec = PenaltySpec::for_family(design.family, 1.0, gammas.first().copied(), sgl_ratio).map_err(to_py)?;
    let opts = path_options(Some(gammas), nlambda, lambda_min_ratio, 1e-7, 10_000);
    let rep = py.detach(|| kfold_cv(&design.inner, &spec, &opts, folds, seed)).map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))?)
}

/// Minimizer of ||z - theta||^2 / 2 + rho(||theta||; lam, gamma).
#[pyfunction]
fn solve_single_group(z: Vec<f64>, lam: f64, gamma: f64, penalty: &str) -> PyResult<Vec<f64>> {
    grpsel::solve_single_group(&z, lam, gamma, family(penalty)?).map_err(to_py)
}

#[pyfunction]
fn soft_threshold(z: Vec<f64>, t: f64) -> Vec<f64> {
    grpsel::soft_threshold_vec(&z, t)
}

#[pyfunction]
fn chisq_tail_bound(t: f64, k: f64) -> PyResult<f64> {
    grpsel::chisq_tail_bound(t, k).map_err(to_py)
}

/// Simulated dataset as a dict with keys x, y, names, labels, true_beta, support.
#[pyfunction]
#[pyo3(signature = (scenario = "figure1", n = 100, sigma = 1.0, correlation = 0.0, seed = 1, groups = None))]
fn simulate<'py>(
    py: Python<'py>,
    scenario: &str,
    n: usize,
    sigma: f64,
    correlation: f64,
    seed: u64,
    groups: Option<Vec<Vec<f64>>>,
) -> PyResult<Bound<'py, PyDict>> {
    let name: ScenarioName = scenario.parse().map_err(to_py)?;
    let d = grpsel::simulate(&ScenarioSpec { name, n, sigma, correlation, seed, groups }).map_err(to_py)?;
    let out = PyDict::new(py);
    let rows: Vec<Vec<f64>> = (0..d.x.nrows()).map(|i| d.x.row(i).iter().copied().collect()).collect();
    out.set_item("x", rows)?;
    out.set_item("y", d.y)?;
    out.set_item("names", d.names)?;
    out.set_item("labels", d.labels)?;
    out.set_item("true_beta", d.true_beta)?;
    out.set_item("support", d.support)?;
    Ok(out)
}

/// Runs a theory experiment from a JSON string or a dict.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let text: String = if config.is_instance_of::<PyString>() {
        config.extract()?
    } else {
        py.import("json")?.call_method1("dumps", (config,))?.extract()?
    };
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("config error: {e}")))?;
    let rep = py.detach(|| run_lab(&cfg)).map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))?)
}

#[pymodule]
fn pygrpsel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDesign>()?;
    m.add_class::<PyFit>()?;
    m.add_class::<PyPath>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(path, m)?)?;
    m.add_function(wrap_pyfunction!(cv, m)?)?;
    m.add_function(wrap_pyfunction!(solve_single_group, m)?)?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(chisq_tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
