//! Mixed-integer DC programming: minimize `g(x) − h(x)` over a polyhedron with
//! integrality constraints, where `g` and `h` are convex expressions.
//!
//! The outer loop ([`dca`]) linearizes `h` and solves a convex mixed-integer
//! program per iteration ([`minlp`]), optionally on smoothed expressions with a
//! geometrically shrinking parameter.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod corpus;
pub mod dca;
pub mod error;
pub mod expr;
pub mod io;
pub mod lp;
pub mod minlp;
pub mod oracle;
pub mod problem;
pub mod verify;

pub use dca::{
    run_scmip, run_smoothing_scmip, scmip_step, stationarity_residual, Mode, SolveOutcome,
    SolverConfig, Status, Trace,
};
pub use error::{Error, Result};
pub use expr::{ConvexExpr, SmoothSpec, SmoothingKernel};
pub use io::{ExprDoc, ProblemDoc};
pub use lp::{solve_lp, LpInstance, LpResult, LpStatus};
pub use minlp::{SubproblemResult, SubproblemSpec, SubproblemStatus, SubproblemTolerances};
pub use problem::{FeasibleSet, MidcProblem, ValidationReport};
