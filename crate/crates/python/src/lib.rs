//! Python module `cht`.

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cht_core::baselines::{top_pairs as core_top_pairs, Method};
use cht_core::contrasts::compute_all_contrasts_with;
use cht_core::row_solver::{compute_knots, solve_row as core_solve_row};
use cht_core::simulation::{generate_scenario, Scenario, ScenarioConfig};
use cht_core::verification::{run_oracle_check, OracleConfig};
use cht_core::{
    compute_test_statistics, entry_points_row, estimate_fdr as core_estimate_fdr, Class, ClassedDataset, ContrastMode,
    ContrastOptions, ContrastSet, CsvOptions, FdrOptions,
};

fn to_py(e: cht_core::Error) -> PyErr {
    match e {
        cht_core::Error::Io { .. } | cht_core::Error::Csv(_) => PyIOError::new_err(format!("{e:#}")),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Array2::from_shape_vec((n, p), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Two-class dataset: `x` is a list of rows, `y` holds labels 1 and 2.
#[pyclass(name = "Dataset", module = "cht", frozen)]
struct PyDataset {
    inner: ClassedDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (x, y, feature_names=None))]
    fn new(x: Vec<Vec<f64>>, y: Vec<u8>, feature_names: Option<Vec<String>>) -> PyResult<Self> {
        let labels = y
            .into_iter()
            .map(|v| match v {
                1 => Ok(Class::One),
                2 => Ok(Class::Two),
                other => Err(PyValueError::new_err(format!("class labels must be 1 or 2, got {other}"))),
            })
            .collect::<PyResult<Vec<_>>>()?;
        let inner = ClassedDataset::new(matrix(x)?, labels, feature_names).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, has_header=true, label_column=0))]
    fn from_csv(path: &str, has_header: bool, label_column: usize) -> PyResult<Self> {
        let inner = ClassedDataset::load_csv(path, CsvOptions { has_header, label_column }).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        self.inner.write_csv(file).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    /// Rows in class 1 and class 2.
    #[getter]
    fn class_sizes(&self) -> (usize, usize) {
        (self.inner.n1(), self.inner.n2())
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        rows(self.inner.x())
    }

    #[getter]
    fn y(&self) -> Vec<u8> {
        self.inner.y().iter().map(|c| c.index() as u8 + 1).collect()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={}, classes=({}, {}))", self.inner.n(), self.inner.p(), self.inner.n1(), self.inner.n2())
    }
}

/// Main-effect contrasts `w` and the symmetric interaction contrasts `z`.
#[pyclass(name = "Contrasts", module = "cht", frozen)]
struct PyContrasts {
    inner: ContrastSet,
}

#[pymethods]
impl PyContrasts {
    /// Builds contrasts from `w` and the upper triangle of `z` in lexicographic pair order.
    #[staticmethod]
    fn from_parts(w: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: ContrastSet::from_parts(w, &upper).map_err(to_py)? })
    }

    #[getter]
    fn w(&self) -> Vec<f64> {
        self.inner.w.clone()
    }

    #[getter]
    fn z(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.z)
    }

    fn row(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.p() {
            return Err(PyIndexError::new_err(format!("feature {j} out of range")));
        }
        Ok(self.inner.row(j))
    }
}

/// Entry-point statistics of every feature and pair.
#[pyclass(name = "TestStatistics", module = "cht", frozen)]
struct PyTestStatistics {
    inner: cht_core::TestStatistics,
}

#[pymethods]
impl PyTestStatistics {
    #[getter]
    fn lambda_main(&self) -> Vec<f64> {
        self.inner.lambda_main.clone()
    }

    /// Symmetric matrix of pair statistics.
    #[getter]
    fn lambda_int(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.lambda_int)
    }

    /// Row-wise statistics before symmetrizing.
    #[getter]
    fn lambda_int_asym(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.lambda_int_asym)
    }

    fn lambda_prime(&self, j: usize, k: usize) -> PyResult<f64> {
        let p = self.inner.p();
        if j >= p || k >= p || j == k {
            return Err(PyIndexError::new_err(format!("no pair ({j}, {k})")));
        }
        Ok(self.inner.lambda_prime(j, k))
    }

    fn pair_values(&self) -> Vec<f64> {
        self.inner.pair_values()
    }

    fn main_order(&self) -> Vec<usize> {
        self.inner.main_order()
    }

    fn interaction_order(&self) -> Vec<(usize, usize)> {
        self.inner.interaction_order()
    }
}

/// Solution of one row at a single `lambda`.
#[pyclass(name = "RowSolution", module = "cht", frozen, get_all)]
struct PyRowSolution {
    beta_plus: f64,
    beta_minus: f64,
    theta: Vec<f64>,
    /// `I(i)`, `I(ii)`, `II` or `III`.
    case: String,
    alpha: f64,
    gamma_plus: f64,
    gamma_minus: f64,
    kkt_residual: f64,
}

#[pymethods]
impl PyRowSolution {
    #[getter]
    fn beta(&self) -> f64 {
        self.beta_plus - self.beta_minus
    }

    fn __repr__(&self) -> String {
        format!("RowSolution(case={}, beta={}, alpha={})", self.case, self.beta(), self.alpha)
    }
}

/// Permutation FDR estimate on a threshold grid.
#[pyclass(name = "FdrCurve", module = "cht", frozen, get_all)]
struct PyFdrCurve {
    lambda_grid: Vec<f64>,
    observed_exceed: Vec<u64>,
    null_exceed_mean: Vec<f64>,
    fdr_hat: Vec<f64>,
    permutations: usize,
    seed: u64,
}

#[pyfunction]
#[pyo3(signature = (dataset, materialize=false))]
fn contrasts(py: Python<'_>, dataset: &PyDataset, materialize: bool) -> PyResult<PyContrasts> {
    let mode = if materialize { ContrastMode::Materialized } else { ContrastMode::Streamed };
    let ds = &dataset.inner;
    let inner = py.detach(|| compute_all_contrasts_with(ds, ContrastOptions { mode, ..Default::default() })).map_err(to_py)?;
    Ok(PyContrasts { inner })
}

#[pyfunction]
fn test_statistics(py: Python<'_>, contrasts: &PyContrasts) -> PyTestStatistics {
    let c = &contrasts.inner;
    PyTestStatistics { inner: py.detach(|| compute_test_statistics(c)) }
}

/// `(lambda_hat_j, [lambda_hat_jk, ...])` for one row.
#[pyfunction]
fn entry_points(w: f64, z: Vec<f64>) -> (f64, Vec<f64>) {
    entry_points_row(w, &z)
}

#[pyfunction]
fn solve_row(w: f64, z: Vec<f64>, lam: f64) -> PyResult<PyRowSolution> {
    let (sol, cert) = core_solve_row(w, &z, lam).map_err(to_py)?;
    Ok(PyRowSolution {
        beta_plus: sol.beta_plus,
        beta_minus: sol.beta_minus,
        case: sol.case.to_string(),
        alpha: cert.alpha,
        gamma_plus: cert.gamma_plus,
        gamma_minus: cert.gamma_minus,
        kkt_residual: cert.residuals.max(),
        theta: sol.theta,
    })
}

/// Knots of a row as a dict; infinite knots come back as `inf`.
#[pyfunction]
fn knots<'py>(py: Python<'py>, w: f64, z: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let k = compute_knots(w, &z);
    let d = PyDict::new(py);
    d.set_item("lam1", k.lam1)?;
    d.set_item("lam2", k.lam2)?;
    d.set_item("lam3", k.lam3)?;
    d.set_item("lam4", k.lam4)?;
    d.set_item("regime", format!("{:?}", k.regime))?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (dataset, permutations=100, seed=1, lambda_grid=None))]
fn estimate_fdr(
    py: Python<'_>,
    dataset: &PyDataset,
    permutations: usize,
    seed: u64,
    lambda_grid: Option<Vec<f64>>,
) -> PyResult<PyFdrCurve> {
    let ds = &dataset.inner;
    let options = FdrOptions { permutations, seed, lambda_grid, ..Default::default() };
    let curve = py
        .detach(|| {
            let contrasts = compute_all_contrasts_with(ds, options.contrast)?;
            core_estimate_fdr(ds, &contrasts, &options)
        })
        .map_err(to_py)?;
    Ok(PyFdrCurve {
        lambda_grid: curve.lambda_grid,
        observed_exceed: curve.observed_exceed,
        null_exceed_mean: curve.null_exceed_mean,
        fdr_hat: curve.fdr_hat,
        permutations: curve.permutations,
        seed: curve.seed,
    })
}

/// Simulated dataset and its ground truth `{"main": [...], "interactions": [(j, k), ...]}`.
#[pyfunction]
#[pyo3(signature = (scenario="hierarchical", n=200, p=50, n_main=5, ints_per_main=9, delta=None, rho=None, seed=1))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    scenario: &str,
    n: usize,
    p: usize,
    n_main: usize,
    ints_per_main: usize,
    delta: Option<f64>,
    rho: Option<f64>,
    seed: u64,
) -> PyResult<(PyDataset, Bound<'py, PyDict>)> {
    let scenario: Scenario = scenario.parse().map_err(to_py)?;
    let defaults = ScenarioConfig::default();
    let config = ScenarioConfig {
        scenario,
        n,
        p,
        n_main,
        ints_per_main,
        main_effect_size: delta.unwrap_or(defaults.main_effect_size),
        interaction_strength: rho.unwrap_or(defaults.interaction_strength),
        seed,
    };
    let (ds, truth) = generate_scenario(&config).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("main", truth.true_main)?;
    d.set_item("interactions", truth.true_interaction)?;
    Ok((PyDataset { inner: ds }, d))
}

/// Top `k` pairs under `method`: `cht`, `all-pairs`, `strong-screen` or `weak-screen`.
#[pyfunction]
#[pyo3(signature = (dataset, k, method="cht"))]
fn top_pairs(py: Python<'_>, dataset: &PyDataset, k: usize, method: &str) -> PyResult<Vec<(usize, usize)>> {
    let method: Method = method.parse().map_err(to_py)?;
    let ds = &dataset.inner;
    py.detach(|| core_top_pairs(ds, method, k)).map_err(to_py)
}

/// Runs the brute-force comparison; returns summary maxima and the failure count.
#[pyfunction]
#[pyo3(signature = (instances=1000, seed=1))]
fn oracle_check<'py>(py: Python<'py>, instances: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = OracleConfig { instances, seed, ..Default::default() };
    let report = py.detach(|| run_oracle_check(&cfg));
    let d = PyDict::new(py);
    d.set_item("instances", report.instances)?;
    d.set_item("max_coordinate_discrepancy", report.max_coordinate_discrepancy)?;
    d.set_item("max_objective_gap", report.max_objective_gap)?;
    d.set_item("max_kkt_residual", report.max_kkt_residual)?;
    d.set_item("max_entry_point_discrepancy", report.max_entry_point_discrepancy)?;
    d.set_item("failures", report.failures.len())?;
    d.set_item("passed", report.passed())?;
    Ok(d)
}

#[pymodule]
fn cht(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyContrasts>()?;
    m.add_class::<PyTestStatistics>()?;
    m.add_class::<PyRowSolution>()?;
    m.add_class::<PyFdrCurve>()?;
    m.add_function(wrap_pyfunction!(contrasts, m)?)?;
    m.add_function(wrap_pyfunction!(test_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(entry_points, m)?)?;
    m.add_function(wrap_pyfunction!(solve_row, m)?)?;
    m.add_function(wrap_pyfunction!(knots, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_fdr, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(top_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_check, m)?)?;
    Ok(())
}
