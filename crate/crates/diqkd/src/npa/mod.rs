//! Moment-matrix (NPA-style) lower bounds on Eve's uncertainty.
//!
//! The conditional entropy H(A|E) is bounded below by a Gauss-Radau
//! expansion whose nodes each yield a noncommutative polynomial optimization
//! problem, relaxed to a semidefinite program over a level-2 moment matrix
//! augmented with selected third-order words, and solved by the embedded
//! dense interior-point method.

pub mod algebra;
mod bound;
mod problem;
mod quadrature;
mod sdpa;
mod solver;

pub use bound::{entropy_bound, entropy_bound_detailed, EntropyOptions, NodeValue};
pub use problem::{build_block, basis_names, BlockSpec, MomentProblem, ProblemMeta};
pub use quadrature::{gauss_radau, QuadratureRule};
pub use sdpa::{export_sdpa, import_sdpa};
pub use solver::{solve, solve_dense, DenseSdp, SolverOptions, SolverReport, SolverStatus, SparseSym};
