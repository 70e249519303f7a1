//! Half-subsample stability selection.
//!
//! The rows of the least-squares pair are repeatedly subsampled to half
//! their number; the l1 solve runs on each subsample at a fixed penalty and
//! the per-coefficient selection frequency is the fraction of subsamples in
//! which the coefficient came out non-zero. Coefficients whose frequency
//! exceeds a threshold form the support; the reported coefficient values are
//! an unpenalized least-squares refit of the full problem on that support.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{GlarmaError, Result};
use crate::linalg::{solve_spd, solve_sym_floored};
use crate::rng::{rng_for, sample_indices};

use super::lasso::{solve_lasso, LassoFit};
use super::quadratic::QuadraticProblem;

/// Stream label for subsample index derivation.
const STREAM_SUBSAMPLE: u64 = 0x5354_4142; // "STAB"

/// Coordinate-descent tolerance used inside the subsample solves.
const CD_TOL: f64 = 1e-8;
const CD_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct StabilityResult {
    /// Per-coefficient selection frequencies in `[0, 1]`.
    pub frequencies: Array1<f64>,
    pub lambda_used: f64,
    pub n_subsamples: usize,
    /// Refit values on the primary-threshold support, zeros elsewhere.
    pub eta_hat: Array1<f64>,
    pub primary_threshold: f64,
    /// Set when the primary-threshold support came out empty.
    pub empty_support: bool,
    /// Subsample solves that hit the sweep cap.
    pub nonconverged: usize,
    /// Set when the refit needed the eigenvalue-floored fallback solve.
    pub refit_floored: bool,
}

impl StabilityResult {
    /// Indices with frequency strictly above `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.frequencies
            .iter()
            .enumerate()
            .filter(|(_, &f)| f > threshold)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn primary_support(&self) -> Vec<usize> {
        self.support(self.primary_threshold)
    }
}

/// Runs stability selection on `problem` at the penalty `lambda`.
///
/// Subsamples draw `floor(r / 2)` of the kept rows uniformly without
/// replacement; each derives its own RNG stream from `seed`, so the result
/// is identical regardless of scheduling order.
pub fn stability_selection(
    problem: &QuadraticProblem,
    lambda: f64,
    n_subsamples: usize,
    seed: u64,
    primary_threshold: f64,
) -> Result<StabilityResult> {
    let r = problem.n_rows();
    if r < 2 {
        return Err(GlarmaError::TooFewRows(r));
    }
    if n_subsamples == 0 {
        return Err(GlarmaError::InvalidConfig("n_subsamples must be >= 1".into()));
    }
    let m = r / 2;
    let p = problem.n_cols();

    // Shared warm start: the full-problem solution at the same penalty.
    let warm = solve_lasso(
        problem.design(),
        problem.response(),
        None,
        lambda,
        CD_TOL,
        CD_MAX_SWEEPS,
        None,
    );

    let (counts, nonconverged) = (0..n_subsamples)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng_for(seed, &[STREAM_SUBSAMPLE, s as u64]);
            let rows = sample_indices(&mut rng, r, m);
            let fit: LassoFit = solve_lasso(
                problem.design(),
                problem.response(),
                Some(&rows),
                lambda,
                CD_TOL,
                CD_MAX_SWEEPS,
                Some(&warm.coefficients),
            );
            let mut counts = vec![0u32; p];
            for (j, &b) in fit.coefficients.iter().enumerate() {
                if b != 0.0 {
                    counts[j] = 1;
                }
            }
            (counts, usize::from(!fit.converged))
        })
        .reduce(
            || (vec![0u32; p], 0usize),
            |(mut acc, bad), (cur, cur_bad)| {
                for (a, c) in acc.iter_mut().zip(cur) {
                    *a += c;
                }
                (acc, bad + cur_bad)
            },
        );

    let frequencies =
        Array1::from_iter(counts.iter().map(|&c| c as f64 / n_subsamples as f64));

    let support: Vec<usize> = frequencies
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > primary_threshold)
        .map(|(j, _)| j)
        .collect();

    let mut eta_hat = Array1::<f64>::zeros(p);
    let mut refit_floored = false;
    let empty_support = support.is_empty();
    if !empty_support {
        let (values, floored) = refit_on_support(problem, &support);
        refit_floored = floored;
        for (k, &j) in support.iter().enumerate() {
            eta_hat[j] = values[k];
        }
    }

    Ok(StabilityResult {
        frequencies,
        lambda_used: lambda,
        n_subsamples,
        eta_hat,
        primary_threshold,
        empty_support,
        nonconverged,
        refit_floored,
    })
}

/// Unpenalized least-squares refit of the full problem on `support`.
fn refit_on_support(problem: &QuadraticProblem, support: &[usize]) -> (Vec<f64>, bool) {
    let x = problem.design();
    let y = problem.response();
    let r = problem.n_rows();
    let k = support.len();
    let mut xtx = Array2::<f64>::zeros((k, k));
    let mut xty = Array1::<f64>::zeros(k);
    for (a, &ja) in support.iter().enumerate() {
        for (b, &jb) in support.iter().enumerate().skip(a) {
            let mut dot = 0.0;
            for row in 0..r {
                dot += x[[row, ja]] * x[[row, jb]];
            }
            xtx[[a, b]] = dot;
            xtx[[b, a]] = dot;
        }
        let mut dot = 0.0;
        for row in 0..r {
            dot += x[[row, ja]] * y[row];
        }
        xty[a] = dot;
    }
    match solve_spd(&xtx, &xty) {
        Some(sol) => (sol.to_vec(), false),
        None => {
            let (sol, _) = solve_sym_floored(&xtx, &xty, 1e-12);
            (sol.to_vec(), true)
        }
    }
}
