//! Sparse selection of the regression coefficients: the quadratic expansion
//! of the log-likelihood rewritten as a least-squares problem, an l1
//! coordinate-descent solver, and half-subsample stability selection.

mod lasso;
mod quadratic;
mod stability;

pub use lasso::{kkt_violation, lambda_grid, lasso_cd, lasso_objective, solve_lasso, LassoFit};
pub use quadratic::{build_quadratic_problem, QuadraticProblem};
pub use stability::{stability_selection, StabilityResult};
