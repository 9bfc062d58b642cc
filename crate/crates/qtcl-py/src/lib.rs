//! Python bindings: bath kernels, the two reference models and the three
//! solver families, with trajectories returned as plain lists of complex
//! numbers. Matrix indices on the Python side are 0-based.

use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::sync::Arc;

use qtcl::bath;
use qtcl::linalg::{ComplexMatrix, DensityMatrix, ElementIndex};
use qtcl::models::{Rule, SingleQubitModel, TwoQubitModel};
use qtcl::propagator::{self, Method, SolverConfig};

fn to_py_err(err: qtcl::Error) -> PyErr {
    use qtcl::Error::*;
    match err {
        Io(e) => PyIOError::new_err(e.to_string()),
        Integration { .. } | KernelBuild { .. } | Coverage { .. } | Divergence { .. }
        | GridMismatch => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn matrix_from_rows(rows: Vec<Vec<C64>>) -> PyResult<ComplexMatrix> {
    let dim = rows.len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(PyValueError::new_err("state must be a square nested list"));
    }
    let mut m = ComplexMatrix::zeros(dim);
    for (i, row) in rows.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            m[(i, j)] = *z;
        }
    }
    Ok(m)
}

fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<C64>> {
    (0..m.dim())
        .map(|i| (0..m.dim()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn parse_method(name: &str) -> PyResult<Method> {
    match name {
        "traditional" => Ok(Method::Traditional),
        "element_iterative" => Ok(Method::ElementIterative),
        "markov" => Ok(Method::Markov),
        other => Err(PyValueError::new_err(format!(
            "unknown method `{other}` (expected traditional, element_iterative or markov)"
        ))),
    }
}

/// Ohmic bath parameters and the kernels derived from them.
#[pyclass(name = "BathSpec", module = "qtcl_py", from_py_object)]
#[derive(Clone)]
struct PyBathSpec {
    inner: bath::BathSpec,
}

#[pymethods]
impl PyBathSpec {
    #[new]
    fn new(lambda_: f64, omega_c: f64, omega0: f64, beta: f64) -> PyResult<Self> {
        Ok(Self { inner: bath::BathSpec::new(lambda_, omega_c, omega0, beta).map_err(to_py_err)? })
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn omega_c(&self) -> f64 {
        self.inner.omega_c
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.inner.omega0
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    /// J(omega) = lambda * omega * exp(-omega / omega_c).
    fn spectral_density(&self, omega: f64) -> PyResult<f64> {
        self.inner.spectral_density(omega).map_err(to_py_err)
    }

    /// (f_plus(t), f_minus(t)).
    fn f_kernels(&self, t: f64) -> PyResult<(f64, f64)> {
        self.inner.f_kernels(t).map_err(to_py_err)
    }

    /// Complex coherence decay rate g(t).
    fn g_kernel(&self, t: f64) -> PyResult<C64> {
        self.inner.g_kernel(t).map_err(to_py_err)
    }

    /// (C_plus(tau), C_minus(tau)).
    fn correlation_kernels(&self, tau: f64) -> PyResult<(C64, C64)> {
        self.inner.correlation_kernels(tau).map_err(to_py_err)
    }

    /// (f_plus_inf, f_minus_inf, g_inf): the t -> infinity kernel values.
    fn markov_limits(&self) -> PyResult<(f64, f64, C64)> {
        let lim = self.inner.markov_limits().map_err(to_py_err)?;
        Ok((lim.f_plus_inf, lim.f_minus_inf, lim.g_inf))
    }

    fn __repr__(&self) -> String {
        format!(
            "BathSpec(lambda_={}, omega_c={}, omega0={}, beta={})",
            self.inner.lambda, self.inner.omega_c, self.inner.omega0, self.inner.beta
        )
    }
}

/// Solver output on the restart-step sample grid.
#[pyclass(name = "Trajectory", module = "qtcl_py")]
struct PyTrajectory {
    inner: propagator::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Density matrix at sample index k, as nested lists.
    fn state(&self, k: usize) -> PyResult<Vec<Vec<C64>>> {
        self.inner
            .states()
            .get(k)
            .map(|s| matrix_to_rows(s.matrix()))
            .ok_or_else(|| PyValueError::new_err(format!("sample index {k} out of range")))
    }

    /// Series of one matrix element over the whole trajectory (0-based
    /// indices into the canonical lower-triangular set).
    fn element(&self, row: usize, col: usize) -> PyResult<Vec<C64>> {
        self.inner
            .element_series(ElementIndex::new(row, col))
            .map(|s| s.to_vec())
            .ok_or_else(|| {
                PyValueError::new_err(format!(
                    "element ({row},{col}) is not part of the canonical set"
                ))
            })
    }

    /// Raw (pre-closure) trace at every sample.
    fn raw_traces(&self) -> Vec<C64> {
        self.inner.raw_traces().to_vec()
    }

    fn max_trace_drift(&self) -> f64 {
        self.inner.max_trace_drift()
    }
}

/// Deviation summary between two trajectories on the same grid.
#[pyclass(name = "CompareReport", module = "qtcl_py")]
struct PyCompareReport {
    #[pyo3(get)]
    max_abs_deviation: f64,
    #[pyo3(get)]
    final_time_deviation: f64,
    #[pyo3(get)]
    max_trace_drift_a: f64,
    #[pyo3(get)]
    max_trace_drift_b: f64,
    per_element: Vec<((usize, usize), f64)>,
}

#[pymethods]
impl PyCompareReport {
    fn per_element_max_dev(&self) -> Vec<((usize, usize), f64)> {
        self.per_element.clone()
    }
}

struct RunArgs {
    method: Method,
    cfg: SolverConfig,
    dt_kernel: f64,
    t_table: f64,
}

fn resolve_args(
    method: &str,
    restart_step: f64,
    t_final: f64,
    dt: Option<f64>,
    dt_kernel: Option<f64>,
    renormalize_trace: bool,
) -> PyResult<RunArgs> {
    let method = parse_method(method)?;
    let dt = dt.unwrap_or(restart_step / 10.0);
    let cfg = SolverConfig { dt, restart_step, t_final, renormalize_trace, method };
    cfg.validate().map_err(to_py_err)?;
    Ok(RunArgs { method, cfg, dt_kernel: dt_kernel.unwrap_or(dt / 2.0), t_table: t_final })
}

/// Propagate a single qubit in a thermal bath.
#[pyfunction]
#[pyo3(signature = (bath, rho0, method="traditional", *, restart_step, t_final, dt=None, dt_kernel=None, renormalize_trace=false))]
#[allow(clippy::too_many_arguments)]
fn solve_single_qubit(
    bath: PyBathSpec,
    rho0: Vec<Vec<C64>>,
    method: &str,
    restart_step: f64,
    t_final: f64,
    dt: Option<f64>,
    dt_kernel: Option<f64>,
    renormalize_trace: bool,
) -> PyResult<PyTrajectory> {
    let args = resolve_args(method, restart_step, t_final, dt, dt_kernel, renormalize_trace)?;
    let rho0 = DensityMatrix::from_matrix(matrix_from_rows(rho0)?).map_err(to_py_err)?;
    let model = SingleQubitModel::new(bath.inner);
    let inner = match args.method {
        Method::Markov => {
            let gen = model.markov_generator(Rule::Traditional).map_err(to_py_err)?;
            propagator::solve_markov(&gen, &rho0, &args.cfg)
        }
        _ => {
            let table = bath::KernelTable::build(bath.inner, args.t_table, args.dt_kernel)
                .map_err(to_py_err)?;
            let gen = model.generator(Rule::Traditional, Arc::new(table));
            match args.method {
                Method::Traditional => propagator::solve_traditional(&gen, &rho0, &args.cfg),
                Method::ElementIterative => propagator::solve_iterative(&gen, &rho0, &args.cfg),
                Method::Markov => unreachable!(),
            }
        }
    }
    .map_err(to_py_err)?;
    Ok(PyTrajectory { inner })
}

/// Propagate two dipole-coupled qubits in a common bath.
#[pyfunction]
#[pyo3(signature = (bath, v, alpha1, alpha2, rho0, method="traditional", *, restart_step, t_final, dt=None, dt_kernel=None, renormalize_trace=false))]
#[allow(clippy::too_many_arguments)]
fn solve_two_qubit(
    bath: PyBathSpec,
    v: f64,
    alpha1: C64,
    alpha2: C64,
    rho0: Vec<Vec<C64>>,
    method: &str,
    restart_step: f64,
    t_final: f64,
    dt: Option<f64>,
    dt_kernel: Option<f64>,
    renormalize_trace: bool,
) -> PyResult<PyTrajectory> {
    let args = resolve_args(method, restart_step, t_final, dt, dt_kernel, renormalize_trace)?;
    let rho0 = DensityMatrix::from_matrix(matrix_from_rows(rho0)?).map_err(to_py_err)?;
    let model = TwoQubitModel::new(bath.inner, v, alpha1, alpha2).map_err(to_py_err)?;
    let inner = match args.method {
        Method::Markov => {
            let gen = model.markov_generator(Rule::Traditional).map_err(to_py_err)?;
            propagator::solve_markov(&gen, &rho0, &args.cfg)
        }
        _ => {
            let table = bath::KernelTable::build(bath.inner, args.t_table, args.dt_kernel)
                .map_err(to_py_err)?;
            let gen = model
                .generator(Rule::Traditional, Arc::new(table), 0.0)
                .map_err(to_py_err)?;
            match args.method {
                Method::Traditional => propagator::solve_traditional(&gen, &rho0, &args.cfg),
                Method::ElementIterative => propagator::solve_iterative(&gen, &rho0, &args.cfg),
                Method::Markov => unreachable!(),
            }
        }
    }
    .map_err(to_py_err)?;
    Ok(PyTrajectory { inner })
}

/// The interaction-picture coupling operator of the two-qubit model.
#[pyfunction]
fn k_operator(bath: PyBathSpec, v: f64, alpha1: C64, alpha2: C64, t: f64) -> PyResult<Vec<Vec<C64>>> {
    let model = TwoQubitModel::new(bath.inner, v, alpha1, alpha2).map_err(to_py_err)?;
    Ok(matrix_to_rows(&model.k_operator(t)))
}

/// Per-element deviation report between two trajectories.
#[pyfunction]
fn compare_trajectories(a: &PyTrajectory, b: &PyTrajectory) -> PyResult<PyCompareReport> {
    let report = propagator::compare(&a.inner, &b.inner).map_err(to_py_err)?;
    Ok(PyCompareReport {
        max_abs_deviation: report.max_abs_deviation,
        final_time_deviation: report.final_time_deviation,
        max_trace_drift_a: report.max_trace_drift_a,
        max_trace_drift_b: report.max_trace_drift_b,
        per_element: report
            .per_element_max_dev
            .iter()
            .map(|(idx, dev)| ((idx.row, idx.col), *dev))
            .collect(),
    })
}

#[pymodule]
fn qtcl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBathSpec>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyCompareReport>()?;
    m.add_function(wrap_pyfunction!(solve_single_qubit, m)?)?;
    m.add_function(wrap_pyfunction!(solve_two_qubit, m)?)?;
    m.add_function(wrap_pyfunction!(k_operator, m)?)?;
    m.add_function(wrap_pyfunction!(compare_trajectories, m)?)?;
    Ok(())
}
