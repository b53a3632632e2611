//! Python bindings: problem definitions, offline training, certified online
//! queries and the two small demos.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lsrb_core::error::Error;
use lsrb_core::problems::{self, ProblemDef, ProblemKind};
use lsrb_core::rb::{self, Basis, OfflineConfig, RbModel};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::InvalidArgument(_) | Error::OutOfBox(_) | Error::Format(_) | Error::Json(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A parametrized problem with its primal and error spaces assembled.
#[pyclass(module = "lsrb", frozen)]
struct Problem {
    inner: ProblemDef,
}

#[pymethods]
impl Problem {
    /// `name` is one of `thermal1`, `thermal3`, `poisson1d`.
    #[new]
    #[pyo3(signature = (name, n = 16, z_depth = problems::DEFAULT_Z_DEPTH))]
    fn new(name: &str, n: usize, z_depth: usize) -> PyResult<Self> {
        let kind = ProblemKind::from_name(name).map_err(to_py)?;
        Ok(Self { inner: ProblemDef::build(kind, n, z_depth).map_err(to_py)? })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn x_dim(&self) -> usize {
        self.inner.x.dim()
    }

    #[getter]
    fn z_dim(&self) -> usize {
        self.inner.z.dim()
    }

    #[getter]
    fn q_a(&self) -> usize {
        self.inner.q_a()
    }

    /// `(lower, upper)` corners of the parameter box.
    #[getter]
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.inner.params.lower.clone(), self.inner.params.upper.clone())
    }

    fn training_set(&self, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        problems::sample_training_set(&self.inner, count, seed).map_err(to_py)
    }

    fn test_set(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        problems::sample_test_set(&self.inner, count, seed)
    }

    /// Full-order solution coefficients on the primal space.
    fn solve(&self, py: Python<'_>, mu: Vec<f64>) -> PyResult<Vec<f64>> {
        py.detach(|| rb::full_order_solve(&self.inner, &mu)).map_err(to_py)
    }

    /// Discrete coercivity constant by a direct eigensolve.
    fn alpha_h(&self, py: Python<'_>, mu: Vec<f64>) -> PyResult<f64> {
        py.detach(|| lsrb_core::scm::alpha_h(&self.inner, &mu)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, n={}, z_depth={})", self.inner.name(), self.inner.n, self.inner.z_depth)
    }
}

/// A trained reduced model, optionally with its basis vectors.
#[pyclass(module = "lsrb", frozen)]
struct Model {
    inner: RbModel,
    basis: Option<Basis>,
}

#[pymethods]
impl Model {
    /// Greedy training on the default training set of `problem`.
    #[staticmethod]
    #[pyo3(signature = (problem, train_count = None, seed = 0, delta0 = 0.1, n_max = 30, scm_epsilon = 0.1))]
    fn train(
        py: Python<'_>,
        problem: &Problem,
        train_count: Option<usize>,
        seed: u64,
        delta0: f64,
        n_max: usize,
        scm_epsilon: f64,
    ) -> PyResult<Self> {
        let p = &problem.inner;
        let count = train_count.unwrap_or(if p.kind == ProblemKind::Thermal3 { 75 } else { 50 });
        let cfg = OfflineConfig { delta0, n_max, scm_epsilon, seed };
        let (inner, basis) = py
            .detach(|| {
                let train = problems::sample_training_set(p, count, seed)?;
                rb::greedy_offline(p, &train, &cfg)
            })
            .map_err(to_py)?;
        Ok(Self { inner, basis: Some(basis) })
    }

    /// Loads a model file; the basis sidecar is read only if `with_basis`.
    #[staticmethod]
    #[pyo3(signature = (path, with_basis = false))]
    fn load(path: PathBuf, with_basis: bool) -> PyResult<Self> {
        let inner = RbModel::load(&path).map_err(to_py)?;
        let basis = if with_basis { Some(Basis::load(&RbModel::basis_path(&path)).map_err(to_py)?) } else { None };
        Ok(Self { inner, basis })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)?;
        if let Some(b) = &self.basis {
            b.save(&RbModel::basis_path(&path)).map_err(to_py)?;
        }
        Ok(())
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn n_error(&self) -> usize {
        self.inner.n_error
    }

    #[getter]
    fn delta_final(&self) -> f64 {
        self.inner.delta_final
    }

    #[getter]
    fn certified(&self) -> bool {
        self.inner.certified
    }

    #[getter]
    fn effectivity_ceiling(&self) -> Option<f64> {
        self.inner.effectivity_ceiling()
    }

    #[getter]
    fn selected(&self) -> Vec<Vec<f64>> {
        self.inner.selected.clone()
    }

    /// Certified reduced solve: a dict with `c`, `err_norm`, `aux_res`,
    /// `alpha_lb`, `bound` and `effectivity_ceiling`.
    fn online<'py>(&self, py: Python<'py>, mu: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let (sol, cert) = rb::online_solve(&self.inner, &mu).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("c", sol.c)?;
        d.set_item("c_hat", sol.c_hat)?;
        d.set_item("err_norm", cert.err_norm)?;
        d.set_item("aux_res", cert.aux_res)?;
        d.set_item("alpha_lb", cert.alpha_lb)?;
        d.set_item("bound", cert.bound)?;
        d.set_item("effectivity_ceiling", cert.effectivity_ceiling)?;
        Ok(d)
    }

    /// Full-order coefficients of the reduced solution; needs the basis.
    fn reconstruct(&self, mu: Vec<f64>) -> PyResult<Vec<f64>> {
        let Some(b) = &self.basis else {
            return Err(PyValueError::new_err("model was loaded without its basis"));
        };
        let out = rb::online_output(&self.inner, &mu).map_err(to_py)?;
        Ok(b.primal(&out.solution.c))
    }

    fn __repr__(&self) -> String {
        format!("Model({:?}, N={}, delta_final={:.4}, certified={})", self.inner.problem, self.inner.n, self.inner.delta_final, self.inner.certified)
    }
}

/// `(1 + δ)/(1 − δ)` for `0 ≤ δ < 1`.
#[pyfunction]
fn effectivity_ceiling(delta: f64) -> PyResult<f64> {
    lsrb_core::certify::effectivity_ceiling(delta).map_err(to_py)
}

/// Error, residual, smallest eigenvalue and bound ratio of the tridiagonal example.
#[pyfunction]
fn tridiag_demo(py: Python<'_>, n: usize) -> PyResult<Bound<'_, PyDict>> {
    let r = lsrb_core::certify::tridiag_demo(n).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("error", r.error)?;
    d.set_item("residual", r.residual)?;
    d.set_item("lambda_min", r.lambda_min)?;
    d.set_item("ratio", r.ratio)?;
    d.set_item("lower_bound", r.lower_bound)?;
    Ok(d)
}

/// Discrete coercivity constant of the 1D first-order system on `n` intervals.
#[pyfunction]
fn alpha_h_1d(n: usize) -> PyResult<f64> {
    let p = problems::poisson_1d_mesh(n).map_err(to_py)?;
    lsrb_core::scm::alpha_h(&p, &p.params.lower).map_err(to_py)
}

/// Its continuous limit.
#[pyfunction]
fn alpha_1d() -> f64 {
    problems::poisson_1d_alpha()
}

#[pymodule]
fn lsrb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(effectivity_ceiling, m)?)?;
    m.add_function(wrap_pyfunction!(tridiag_demo, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_h_1d, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_1d, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
