//! Solution paths of penalized least squares with quadratic-spline penalties.
//!
//! The penalized loss is
//!
//! ```text
//! (1 / 2n) ||y - X beta||^2 + sum_j rho(|beta_j|; lambda),   rho(t; lambda) = lambda^2 rho_m(t / lambda)
//! ```
//!
//! where `rho_m` is a quadratic spline with `m` knots: the lasso (`m = 1`), the
//! minimax concave penalty (`m = 2`) and SCAD (`m = 3`). [`path::compute_path`]
//! tracks the main branch of the KKT solution set from the origin to a
//! zero-penalty fit, and [`path::solve_at_lambda`] picks the sparsest point of
//! that branch at a given level.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod design;
pub mod error;
pub mod io;
pub mod kkt;
mod linalg;
pub mod path;
pub mod penalty;
pub mod plot;
pub mod selection;
pub mod simlab;

pub use design::{ScanMode, SparseRieszBounds, StandardizedDesign};
pub use error::{Error, Result};
pub use kkt::{kkt_report, local_min_certificate, rescaled_kkt_report, KktReport};
pub use path::{
    compute_path, path_to_coefficients, solve_at_lambda, FitResult, PathOptions, SolutionPath,
};
pub use penalty::{PenaltyKind, QuadSplinePenalty};
