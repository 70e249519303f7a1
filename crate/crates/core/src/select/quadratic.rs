//! The transformed least-squares form of the quadratic expansion.
//!
//! With `U L U'` the eigendecomposition of the negated coefficient Hessian at
//! the expansion point `(eta0, gamma_hat)` and `g` the coefficient score, the
//! second-order expansion of the log-likelihood in `eta` equals (up to a
//! constant) `-1/2 ||Y - X eta||^2` with
//!
//! `Y = L^{1/2} U' eta0 + L^{-1/2} U' g`,  `X = L^{1/2} U'`.
//!
//! Eigenvalues below `1e-8` times the largest one are unidentifiable
//! directions; their rows are dropped from `X` and `Y` and counted.

use ndarray::{Array1, Array2};

use crate::error::{GlarmaError, Result};
use crate::linalg::sym_eigen;
use crate::model::{forward_recursion, hessian_eta, score_eta};
use crate::panel::PanelData;
use crate::params::GlarmaParams;

/// Relative eigenvalue floor for dropping near-null curvature directions.
pub const EIGEN_FLOOR_REL: f64 = 1e-8;

/// Least-squares form of the quadratic expansion, after eigenvalue flooring.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    design: Array2<f64>,
    response: Array1<f64>,
    kept_eigen: Vec<f64>,
    dropped: usize,
    columns: Vec<(usize, usize)>,
    indefinite: bool,
    n_conditions: usize,
    t_len: usize,
}

impl QuadraticProblem {
    /// `r x p` design matrix; rows are scaled eigendirections, columns are
    /// coefficients in condition-major order.
    pub fn design(&self) -> &Array2<f64> {
        &self.design
    }

    pub fn response(&self) -> &Array1<f64> {
        &self.response
    }

    /// Number of kept rows.
    pub fn n_rows(&self) -> usize {
        self.design.nrows()
    }

    /// Number of coefficients `I * T`.
    pub fn n_cols(&self) -> usize {
        self.design.ncols()
    }

    /// The retained eigenvalues, in row order.
    pub fn kept_eigen(&self) -> &[f64] {
        &self.kept_eigen
    }

    /// Count of floored-out eigendirections.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Column-to-`(i, t)` map.
    pub fn columns(&self) -> &[(usize, usize)] {
        &self.columns
    }

    /// Whether the negated Hessian had a meaningfully negative eigenvalue.
    pub fn indefinite(&self) -> bool {
        self.indefinite
    }

    pub fn n_conditions(&self) -> usize {
        self.n_conditions
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    /// `X' X`, the floored negated Hessian.
    pub fn normal_matrix(&self) -> Array2<f64> {
        self.design.t().dot(&self.design)
    }
}

/// Builds the least-squares pair at the expansion point `(eta0, gamma_hat)`.
///
/// The coefficient Hessian is block-diagonal by condition, so each `T x T`
/// block is eigendecomposed separately and the eigenvectors never mix
/// conditions.
pub fn build_quadratic_problem(
    eta0: &Array2<f64>,
    gamma_hat: &Array1<f64>,
    data: &PanelData,
) -> Result<QuadraticProblem> {
    let params = GlarmaParams::new(eta0.clone(), gamma_hat.clone())?;
    let ws = forward_recursion(&params, data)?;
    let score = score_eta(&params, data, &ws);
    let hessian = hessian_eta(&params, data, &ws);
    build_from_parts(eta0, &score, hessian.blocks())
}

/// Assembles the problem from a precomputed score and Hessian blocks.
pub(crate) fn build_from_parts(
    eta0: &Array2<f64>,
    score: &Array1<f64>,
    blocks: &[Array2<f64>],
) -> Result<QuadraticProblem> {
    let t_len = eta0.ncols();
    let n_conditions = eta0.nrows();

    let eigs: Vec<_> = blocks
        .iter()
        .map(|block| sym_eigen(&block.mapv(|v| -v)))
        .collect();

    let lambda_max = eigs
        .iter()
        .flat_map(|e| e.values.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    if !(lambda_max > 0.0) {
        return Err(GlarmaError::DegenerateCurvature);
    }
    let floor = EIGEN_FLOOR_REL * lambda_max;
    let indefinite = eigs
        .iter()
        .flat_map(|e| e.values.iter().copied())
        .any(|v| v < -floor);

    let mut kept_eigen = Vec::new();
    let mut rows: Vec<(usize, usize)> = Vec::new(); // (condition, eigen index)
    let mut dropped = 0usize;
    for (i, eig) in eigs.iter().enumerate() {
        for (k, &lam) in eig.values.iter().enumerate() {
            if lam >= floor {
                rows.push((i, k));
                kept_eigen.push(lam);
            } else {
                dropped += 1;
            }
        }
    }

    let p = n_conditions * t_len;
    let r = rows.len();
    let mut design = Array2::<f64>::zeros((r, p));
    let mut response = Array1::<f64>::zeros(r);
    for (row, &(i, k)) in rows.iter().enumerate() {
        let lam = kept_eigen[row];
        let sqrt_lam = lam.sqrt();
        let u = eigs[i].vectors.column(k);
        let base = i * t_len;
        let mut u_dot_eta = 0.0;
        let mut u_dot_score = 0.0;
        for t in 0..t_len {
            design[[row, base + t]] = sqrt_lam * u[t];
            u_dot_eta += u[t] * eta0[[i, t]];
            u_dot_score += u[t] * score[base + t];
        }
        response[row] = sqrt_lam * u_dot_eta + u_dot_score / sqrt_lam;
    }

    let columns = (0..p).map(|c| (c / t_len, c % t_len)).collect();

    Ok(QuadraticProblem {
        design,
        response,
        kept_eigen,
        dropped,
        columns,
        indefinite,
        n_conditions,
        t_len,
    })
}

/// Test-only constructor wrapping a raw least-squares pair as a problem.
#[cfg(test)]
pub(crate) fn tests_problem_from_parts(
    design: Array2<f64>,
    response: Array1<f64>,
) -> QuadraticProblem {
    let p = design.ncols();
    let kept = design.nrows();
    QuadraticProblem {
        kept_eigen: vec![1.0; kept],
        dropped: 0,
        columns: (0..p).map(|c| (0, c)).collect(),
        indefinite: false,
        n_conditions: 1,
        t_len: p,
        design,
        response,
    }
}
