//! Python bindings: problems, the solver, the enumeration oracle, the
//! kernels and the cycle model. Vectors and matrices cross the boundary as
//! plain lists.

use std::collections::BTreeMap;

use dfgm_core::cost_model::{self, CalibrationGrid};
use dfgm_core::{io, kernels, oracle, random, solver};
use dfgm_core::{Backend, Error, Matrix, MpcModel};
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

create_exception!(dfgm, DivergenceError, PyArithmeticError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Divergence { .. } => DivergenceError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>, cols_if_empty: usize) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols_if_empty));
    }
    Matrix::from_rows(&rows).map_err(to_py)
}

fn nested(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(<[f64]>::to_vec).collect()
}

fn backend(spec: &str) -> PyResult<Backend> {
    spec.parse().map_err(to_py)
}

/// Strictly convex QP: minimize ½ zᵀHz + gᵀz subject to Cz ≤ d.
#[pyclass(name = "QpProblem", module = "dfgm", skip_from_py_object)]
#[derive(Clone)]
struct PyQpProblem {
    inner: dfgm_core::QpProblem,
}

#[pymethods]
impl PyQpProblem {
    #[new]
    #[pyo3(signature = (h, g, c=None, d=None))]
    fn new(h: Vec<Vec<f64>>, g: Vec<f64>, c: Option<Vec<Vec<f64>>>, d: Option<Vec<f64>>) -> PyResult<Self> {
        let n = g.len();
        let h = matrix(h, n)?;
        let c = matrix(c.unwrap_or_default(), n)?;
        let inner = dfgm_core::QpProblem::new(h, g, c, d.unwrap_or_default()).map_err(to_py)?;
        Ok(PyQpProblem { inner })
    }

    /// Parses the text problem format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let inner = io::load_qp(text).map_err(|e| to_py(e.into()))?;
        Ok(PyQpProblem { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (seed, n, m))]
    fn random(seed: u64, n: usize, m: usize) -> Self {
        let mut rng = random::rng(seed);
        PyQpProblem {
            inner: random::random_qp(&mut rng, n, m),
        }
    }

    fn to_text(&self) -> String {
        io::save_qp(&self.inner)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn h(&self) -> Vec<Vec<f64>> {
        nested(&self.inner.h)
    }

    #[getter]
    fn g(&self) -> Vec<f64> {
        self.inner.g.clone()
    }

    #[getter]
    fn c(&self) -> Vec<Vec<f64>> {
        nested(&self.inner.c)
    }

    #[getter]
    fn d(&self) -> Vec<f64> {
        self.inner.d.clone()
    }

    /// Returns the list of violated invariants; empty means valid.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().violations
    }

    fn objective(&self, z: Vec<f64>) -> PyResult<f64> {
        if z.len() != self.inner.n() {
            return Err(PyValueError::new_err(format!("z must have {} entries", self.inner.n())));
        }
        Ok(self.inner.objective(&z))
    }

    fn __repr__(&self) -> String {
        format!("QpProblem(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

#[pyclass(name = "Solution", module = "dfgm", frozen, skip_from_py_object)]
struct PySolution {
    inner: solver::Solution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn z(&self) -> Vec<f64> {
        self.inner.z.clone()
    }

    #[getter]
    fn lam(&self) -> Vec<f64> {
        self.inner.lambda.clone()
    }

    #[getter]
    fn iters(&self) -> usize {
        self.inner.iters
    }

    #[getter]
    fn primal_residual(&self) -> f64 {
        self.inner.primal_residual
    }

    #[getter]
    fn gap(&self) -> f64 {
        self.inner.gap
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective
    }

    fn checksum(&self) -> f64 {
        self.inner.checksum()
    }

    fn to_text(&self) -> String {
        io::save_solution(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(iters={}, primal_residual={:e}, gap={:e})",
            self.inner.iters, self.inner.primal_residual, self.inner.gap
        )
    }
}

/// Runs the dual fast gradient method. `backend` is one of `naive`,
/// `tree`, `blocked[:rows]` or `parallel[:workers]`.
#[pyfunction]
#[pyo3(signature = (problem, max_iters=500, tol=0.0, backend="tree", precondition=false, initial_lambda=None))]
fn solve(
    py: Python<'_>,
    problem: &PyQpProblem,
    max_iters: usize,
    tol: f64,
    backend: &str,
    precondition: bool,
    initial_lambda: Option<Vec<f64>>,
) -> PyResult<PySolution> {
    let opts = solver::SolverOptions {
        max_iters,
        tol,
        backend: self::backend(backend)?,
        precondition,
        initial_lambda,
    };
    let p = &problem.inner;
    let inner = py.detach(|| solver::solve(p, &opts)).map_err(to_py)?;
    Ok(PySolution { inner })
}

/// Exact solution by active-set enumeration. Returns a dict with `z`,
/// `lam`, `active_set` and `objective`.
#[pyfunction]
fn solve_enumerate<'py>(py: Python<'py>, problem: &PyQpProblem) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let p = &problem.inner;
    let sol = py.detach(|| oracle::solve_enumerate(p)).map_err(to_py)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("z", sol.z)?;
    out.set_item("lam", sol.lambda)?;
    out.set_item("active_set", sol.active_set)?;
    out.set_item("objective", sol.objective)?;
    Ok(out)
}

/// KKT residuals of `(z, lam)`; the `pass` key compares all four with `tol`.
#[pyfunction]
#[pyo3(signature = (problem, z, lam, tol=1e-6))]
fn check_kkt<'py>(
    py: Python<'py>,
    problem: &PyQpProblem,
    z: Vec<f64>,
    lam: Vec<f64>,
    tol: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let r = oracle::check_kkt(&problem.inner, &z, &lam, tol).map_err(to_py)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("stationarity", r.stationarity)?;
    out.set_item("primal", r.primal)?;
    out.set_item("dual", r.dual)?;
    out.set_item("complementarity", r.complementarity)?;
    out.set_item("pass", r.pass)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (a, x, backend="tree"))]
fn matvec(a: Vec<Vec<f64>>, x: Vec<f64>, backend: &str) -> PyResult<Vec<f64>> {
    let a = matrix(a, x.len())?;
    kernels::matvec(&a, &x, &self::backend(backend)?).map_err(to_py)
}

#[pyfunction]
fn tree_sum(v: Vec<f64>) -> f64 {
    kernels::tree_sum(&v)
}

fn estimate_config(config: Option<BTreeMap<String, Bound<'_, PyAny>>>) -> PyResult<cost_model::EstimateConfig> {
    let mut text = String::new();
    for (k, v) in config.unwrap_or_default() {
        text.push_str(&format!("{k} = {}\n", v.str()?));
    }
    cost_model::parse_config(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Cycle and resource estimate for an `n`-variable, `m`-constraint loop.
/// `config` maps config-file keys to values, e.g. `{"unroll": "full", "II": 1}`.
#[pyfunction]
#[pyo3(signature = (n, m, config=None))]
fn estimate<'py>(
    py: Python<'py>,
    n: u64,
    m: u64,
    config: Option<BTreeMap<String, Bound<'py, PyAny>>>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let est = estimate_config(config)?;
    let r = cost_model::cycle_report("", n, m, &est).map_err(to_py)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("iter_cycles", r.iter_cycles)?;
    out.set_item("solve_cycles", r.solve_cycles)?;
    out.set_item("iters", r.iters)?;
    out.set_item("mults", r.resources.mults)?;
    out.set_item("adders", r.resources.adders)?;
    out.set_item("mem_banks", r.resources.mem_banks)?;
    Ok(out)
}

/// Grid search for dimensions and latencies that reproduce three
/// per-iteration targets. Returns the found point and its configs as
/// config-file text.
#[pyfunction]
#[pyo3(signature = (targets=(9000, 1000, 237), tolerance=0.15))]
fn calibrate<'py>(
    py: Python<'py>,
    targets: (u64, u64, u64),
    tolerance: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let cal = py
        .detach(|| {
            cost_model::calibrate(
                [targets.0, targets.1, targets.2],
                tolerance,
                &CalibrationGrid::default(),
            )
        })
        .map_err(to_py)?;
    let configs: Vec<String> = cal
        .configs
        .iter()
        .map(|k| {
            cost_model::render_config(&cost_model::EstimateConfig {
                kernel: *k,
                ..Default::default()
            })
        })
        .collect();
    let out = pyo3::types::PyDict::new(py);
    out.set_item("n", cal.n)?;
    out.set_item("m", cal.m)?;
    out.set_item("estimates", cal.estimates.to_vec())?;
    out.set_item("max_rel_error", cal.max_rel_error)?;
    out.set_item("speedups", cal.speedups())?;
    out.set_item("configs", configs)?;
    Ok(out)
}

/// Condensed input-constrained MPC problem for `x⁺ = Ax + Bu`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn condense_mpc(
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    horizon: usize,
    u_min: Vec<f64>,
    u_max: Vec<f64>,
    x0: Vec<f64>,
) -> PyResult<PyQpProblem> {
    let mdl = MpcModel {
        a: matrix(a, 0)?,
        b: matrix(b, 0)?,
        q: matrix(q, 0)?,
        r: matrix(r, 0)?,
        horizon,
        u_min,
        u_max,
        x0,
    };
    let inner = dfgm_core::condense_mpc(&mdl).map_err(to_py)?;
    Ok(PyQpProblem { inner })
}

#[pymodule]
fn dfgm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQpProblem>()?;
    m.add_class::<PySolution>()?;
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(check_kkt, m)?)?;
    m.add_function(wrap_pyfunction!(matvec, m)?)?;
    m.add_function(wrap_pyfunction!(tree_sum, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(condense_mpc, m)?)?;
    Ok(())
}
