//! Dual fast gradient method (dFGM) for the strictly convex QPs of embedded
//! model predictive control.
//!
//! * [`problem`]: QP instances, validation, condensed MPC construction
//! * [`io`]: problem and solution text files
//! * [`kernels`]: matrix-vector primitives with four reduction-order backends
//! * [`solver`]: prologue, main loop and epilogue of the dFGM
//! * [`oracle`]: exact active-set enumeration and KKT checks
//! * [`cost_model`]: cycle/resource estimates under HLS-style directives
//! * [`bench`] and [`report`]: wall-time benchmarks and summary tables

pub mod bench;
pub mod cost_model;
pub mod error;
pub mod io;
pub mod kernels;
pub mod matrix;
pub mod oracle;
pub mod problem;
pub mod random;
pub mod report;
pub mod solver;

pub use error::{Error, ParseError};
pub use kernels::{Backend, BackendKind};
pub use matrix::{Cholesky, Matrix};
pub use problem::{condense_mpc, MpcModel, QpProblem, ValidationReport};
pub use solver::{solve, Precomputed, Solution, SolverOptions};
