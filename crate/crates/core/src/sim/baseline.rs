//! Classical comparator: an l1-penalized Poisson regression fitted to each
//! series position independently, on condition-indicator columns without an
//! intercept, wrapped in the same half-subsample stability protocol so its
//! selection frequencies are threshold-comparable with the pipeline's.
//!
//! Each penalized fit runs iteratively reweighted least squares with a
//! coordinate-descent inner solve; the penalty is the smallest element of the
//! usual log-spaced grid anchored at `lambda_max = max_j |x_j'(y - 1)| / n`
//! (the working gradient at the null coefficient vector).

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::panel::PanelData;
use crate::pipeline::init_eta;
use crate::rng::{rng_for, sample_indices};

const STREAM_BASELINE: u64 = 0x4241_5345; // "BASE"

/// Bound on the linear predictor inside the per-position fits.
const ETA_BOUND: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub n_subsamples: usize,
    pub seed: u64,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    pub primary_threshold: f64,
    pub max_irls: usize,
    pub tol: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            n_subsamples: 1000,
            seed: 0,
            n_lambda: 100,
            lambda_ratio: 1e-4,
            primary_threshold: 0.6,
            max_irls: 25,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    /// Per-coefficient selection frequencies, condition-major `I * T`.
    pub frequencies: Array1<f64>,
    /// Saturated refit values (log cell means) on the primary support.
    pub eta_hat: Array2<f64>,
    /// Per-position fits that hit the iteration cap.
    pub nonconverged: usize,
}

/// Runs the per-position penalized Poisson baseline over the whole panel.
pub fn poisson_lasso_baseline(data: &PanelData, cfg: &BaselineConfig) -> BaselineResult {
    let t_len = data.series_len();
    let n_cond = data.n_conditions();
    let rep_counts = data.rep_counts();
    let n_rows: usize = rep_counts.iter().sum();

    // (condition, count) rows per position are assembled once per t.
    let per_position: Vec<(Vec<u32>, usize)> = (0..t_len)
        .into_par_iter()
        .map(|t| {
            let mut cond_of_row = Vec::with_capacity(n_rows);
            let mut y = Vec::with_capacity(n_rows);
            for (i, &n_i) in rep_counts.iter().enumerate() {
                for j in 0..n_i {
                    cond_of_row.push(i);
                    y.push(data.condition(i)[[j, t]]);
                }
            }

            // Penalty grid anchored at the null-model working gradient.
            let mut lambda_max = 0.0f64;
            for i in 0..n_cond {
                let dot: f64 = (0..n_rows)
                    .filter(|&r| cond_of_row[r] == i)
                    .map(|r| y[r] - 1.0)
                    .sum();
                lambda_max = lambda_max.max(dot.abs());
            }
            lambda_max /= n_rows as f64;
            let lambda = if lambda_max == 0.0 {
                0.0
            } else if cfg.n_lambda <= 1 || cfg.lambda_ratio >= 1.0 {
                lambda_max
            } else {
                cfg.lambda_ratio * lambda_max
            };

            let m = n_rows / 2;
            let mut counts = vec![0u32; n_cond];
            let mut nonconverged = 0usize;
            for s in 0..cfg.n_subsamples {
                let mut rng = rng_for(cfg.seed, &[STREAM_BASELINE, t as u64, s as u64]);
                let rows = sample_indices(&mut rng, n_rows, m);
                let (beta, converged) =
                    irls_lasso_indicators(&cond_of_row, &y, &rows, n_cond, lambda, cfg);
                if !converged {
                    nonconverged += 1;
                }
                for (i, &b) in beta.iter().enumerate() {
                    if b != 0.0 {
                        counts[i] += 1;
                    }
                }
            }
            (counts, nonconverged)
        })
        .collect();

    let mut frequencies = Array1::<f64>::zeros(n_cond * t_len);
    let mut nonconverged = 0usize;
    for (t, (counts, bad)) in per_position.iter().enumerate() {
        nonconverged += bad;
        for i in 0..n_cond {
            frequencies[i * t_len + t] = counts[i] as f64 / cfg.n_subsamples as f64;
        }
    }

    // Unpenalized per-cell refit on the primary support: the saturated
    // Poisson estimate, i.e. the log cell mean.
    let log_means = init_eta(data);
    let mut eta_hat = Array2::<f64>::zeros((n_cond, t_len));
    for i in 0..n_cond {
        for t in 0..t_len {
            if frequencies[i * t_len + t] > cfg.primary_threshold {
                eta_hat[[i, t]] = log_means[[i, t]];
            }
        }
    }

    BaselineResult {
        frequencies,
        eta_hat,
        nonconverged,
    }
}

/// Penalized Poisson IRLS on condition indicators for one row subset.
///
/// The objective is `-(1/n) sum(y x'b - exp(x'b)) + lambda ||b||_1`. Because
/// the indicator columns are disjoint, each coordinate-descent pass solves
/// the weighted subproblem exactly.
fn irls_lasso_indicators(
    cond_of_row: &[usize],
    y: &[f64],
    rows: &[usize],
    n_cond: usize,
    lambda: f64,
    cfg: &BaselineConfig,
) -> (Vec<f64>, bool) {
    let n = rows.len() as f64;
    let mut beta = vec![0.0f64; n_cond];
    let mut converged = false;
    for _ in 0..cfg.max_irls {
        // One weighted-lasso solve at the current expansion point.
        let mut num = vec![0.0f64; n_cond];
        let mut den = vec![0.0f64; n_cond];
        for &r in rows {
            let i = cond_of_row[r];
            let lin = beta[i].clamp(-ETA_BOUND, ETA_BOUND);
            let mu = lin.exp();
            let z = lin + (y[r] - mu) / mu;
            num[i] += mu * z / n;
            den[i] += mu / n;
        }
        let mut max_delta = 0.0f64;
        for i in 0..n_cond {
            let new = if den[i] > 0.0 {
                soft(num[i], lambda) / den[i]
            } else {
                0.0
            };
            let new = new.clamp(-ETA_BOUND, ETA_BOUND);
            max_delta = max_delta.max((new - beta[i]).abs());
            beta[i] = new;
        }
        if max_delta < cfg.tol {
            converged = true;
            break;
        }
    }
    (beta, converged)
}

fn soft(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{gen_eta_star, simulate_panel, SimScenario};
    use ndarray::array;

    #[test]
    fn strong_single_condition_cell_reaches_full_frequency() {
        // One condition, two positions; position 0 has large counts, so that
        // coefficient must be selected in every subsample.
        let data = PanelData::new(vec![array![
            [40.0, 1.0],
            [38.0, 0.0],
            [42.0, 1.0],
            [41.0, 2.0],
            [39.0, 1.0],
            [40.0, 0.0],
        ]])
        .unwrap();
        let cfg = BaselineConfig {
            n_subsamples: 200,
            seed: 3,
            ..BaselineConfig::default()
        };
        let res = poisson_lasso_baseline(&data, &cfg);
        assert_eq!(res.frequencies[0], 1.0);
        // Refit value is the log cell mean.
        assert!((res.eta_hat[[0, 0]] - 40.0f64.ln()).abs() < 0.05);
    }

    #[test]
    fn baseline_is_deterministic() {
        let scenario = SimScenario {
            t_len: 6,
            n_reps_per_condition: 8,
            n_conditions: 3,
            gamma_star: array![0.4],
            n_nonnull: 3,
            ..SimScenario::default()
        };
        let eta_star = gen_eta_star(&scenario, 12);
        let data = simulate_panel(&scenario, &eta_star, 12).unwrap();
        let cfg = BaselineConfig {
            n_subsamples: 100,
            seed: 5,
            ..BaselineConfig::default()
        };
        let a = poisson_lasso_baseline(&data, &cfg);
        let b = poisson_lasso_baseline(&data, &cfg);
        assert_eq!(a.frequencies, b.frequencies);
        assert_eq!(a.eta_hat, b.eta_hat);
    }

    #[test]
    fn independence_panel_gives_comparable_supports_to_glm_pipeline() {
        // gamma* = 0 data: the baseline and the q = 0 pipeline are the same
        // method family and should broadly agree on strong coefficients.
        let scenario = SimScenario {
            t_len: 8,
            n_reps_per_condition: 40,
            n_conditions: 2,
            gamma_star: ndarray::Array1::zeros(0),
            n_nonnull: 3,
            magnitude_range: (2.0, 2.6),
            seed: 21,
            ..SimScenario::default()
        };
        let eta_star = gen_eta_star(&scenario, 21);
        let data = simulate_panel(&scenario, &eta_star, 21).unwrap();

        let base = poisson_lasso_baseline(
            &data,
            &BaselineConfig {
                n_subsamples: 200,
                seed: 9,
                ..BaselineConfig::default()
            },
        );
        let fit = crate::pipeline::fit(
            &data,
            &crate::pipeline::FitConfig {
                q: 0,
                n_subsamples: 200,
                seed: 9,
                ..crate::pipeline::FitConfig::default()
            },
        )
        .unwrap();

        let t_len = data.series_len();
        for flat in 0..data.n_coeffs() {
            let truth = eta_star[[flat / t_len, flat % t_len]];
            if truth.abs() >= 2.0 && truth > 0.0 {
                assert!(
                    base.frequencies[flat] > 0.6,
                    "baseline missed strong coefficient {flat}"
                );
                assert!(
                    fit.frequencies[flat] > 0.6,
                    "pipeline missed strong coefficient {flat}"
                );
            }
        }
    }
}
