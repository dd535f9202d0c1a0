//! A small solver for pure 0/1 integer linear programs.
//!
//! [`solve`] runs branch-and-bound over LP relaxations computed by a bounded
//! revised simplex; [`lp_relax_solve`] exposes the relaxation on its own.
//! [`export_lp_text`] and [`parse_lp_text`] move instances in and out of the
//! common LP text format for cross-checking with external solvers.

mod bnb;
mod error;
mod factor;
mod lp_format;
mod model;
pub mod oracle;
mod simplex;

pub use bnb::{
    lp_relax_solve, solve, solve_with, LpRelaxation, SolveResult, SolveStatus, SolverOptions,
    INTEGRALITY_TOL, OBJECTIVE_TOL,
};
pub use error::{LpParseError, MilpError, ModelError};
pub use lp_format::{export_lp_text, parse_lp_text};
pub use model::{IpInstance, LinearConstraint, Relation, Sense};
