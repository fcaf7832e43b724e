//! Group-penalized linear regression.
//!
//! Group selection (group LASSO, 2-norm group MCP and SCAD) is fit by group
//! coordinate descent on group-orthonormalized designs. Bi-level selection
//! (1-norm group bridge, composite MCP, sparse group LASSO) is fit on
//! column-standardized designs. The [`theory`] module computes the oracle
//! bounds for the 2-norm group MCP and checks them by Monte Carlo.

// `!(a > b)` is used on purpose so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bilevel;
pub mod cv;
pub mod design;
pub mod error;
pub mod gcd;
pub mod lab;
mod linalg;
pub mod path;
pub mod penalty;
pub mod scenario;
pub mod theory;

pub use bilevel::{composite_threshold_lambda, fit_lcd, fit_sparse_group_lasso, CompositeSpec};
pub use cv::{default_gamma_grid, kfold_cv, CvReport};
pub use design::{build_grouped_design, GroupRange, GroupedDesign, Standardization, WeightRule};
pub use error::{Error, Result};
pub use gcd::{fit_gcd, kkt_check, lambda_max, FitResult, SolverOptions};
pub use path::{fit_path, fit_penalized, standardization_for, PathOptions, SolutionPath, WarmStart};
pub use scenario::{simulate, Dataset, ScenarioName, ScenarioSpec};
pub use theory::{chisq_tail_bound, OracleProblem};
pub use penalty::{
    hard_threshold, hard_threshold_star, rho, rho_prime, soft_threshold, soft_threshold_vec,
    solve_single_group, PenaltyFamily, PenaltySpec, ScalarPenalty,
};
