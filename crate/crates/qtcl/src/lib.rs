//! Open-quantum-system propagation with single-element projection operators.
//!
//! The crate implements two families of second-order time-convolutionless
//! solvers for small (n ≤ 4) reduced density matrices coupled to a bosonic
//! thermal bath with Ohmic spectral density:
//!
//! - a reference solver that integrates the time-local master equation for
//!   the full density matrix with a fixed-step fourth-order scheme, and
//! - an element solver that propagates every independent matrix element on
//!   its own scalar quadrature formula, re-freezing the remaining elements
//!   at the start of each restart interval.
//!
//! Two reference models are provided: relaxation of a single qubit in a
//! thermal bath, and two dipole-coupled qubits in a common bath. The `cli`
//! module exposes both behind a configuration-file front end that emits CSV
//! trajectories.

pub mod bath;
pub mod cli;
pub mod linalg;
pub mod models;
pub mod propagator;
pub mod quad;

pub use bath::{BathSpec, KernelTable, MarkovLimits};
pub use linalg::{ComplexMatrix, DensityMatrix, ElementIndex};
pub use cli::RunConfig;
pub use models::{Generator, Rule, SingleQubitModel, TwoQubitModel};
pub use propagator::{compare, solve_element_interval, solve_iterative, solve_markov, solve_traditional};
pub use propagator::{CompareReport, Method, SolverConfig, Trajectory};


use num_complex::Complex64;

/// Crate-wide error type. The CLI maps these onto exit codes: parse and
/// validation failures are exit 2, numerical failures 3, I/O failures 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("element index ({i},{j}) out of range for dimension {dim}")]
    IndexOutOfRange { i: usize, j: usize, dim: usize },

    #[error("matrix is not hermitian (max |a_ij - conj(a_ji)| = {dev:.3e})")]
    NotHermitian { dev: f64 },

    #[error("trace {trace} differs from 1 by more than {tol:.3e}")]
    NotUnitTrace { trace: Complex64, tol: f64 },

    #[error("element set does not match the canonical independent set: {0}")]
    ElementSet(String),

    #[error("diagonal element has imaginary part {imag:.3e}")]
    NonRealDiagonal { imag: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: error estimate {estimate:.3e} exceeds {tolerance:.3e}")]
    Integration { estimate: f64, tolerance: f64 },

    #[error("kernel tabulation failed at grid index {index} (t = {t}): {source}")]
    KernelBuild { index: usize, t: f64, source: Box<Error> },

    #[error("kernel table does not cover t = {t} (grid ends at {t_max})")]
    Coverage { t: f64, t_max: f64 },

    #[error("solver produced a non-finite state at t = {t}")]
    Divergence { t: f64 },

    #[error("trajectories are sampled on different time grids")]
    GridMismatch,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
