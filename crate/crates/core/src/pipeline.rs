//! End-to-end fit: initialization, Newton-Raphson for the feedback
//! coefficients, penalized selection of the regression coefficients, and the
//! outer iteration until the feedback estimate stabilises.
//!
//! Iteration `k` estimates `gamma` at the current coefficient matrix
//! (warm-started from the previous estimate), expands the likelihood there,
//! runs stability selection, and feeds the refit coefficients back as the
//! next expansion point. With `q = 0` the Newton stage is skipped entirely;
//! with a fixed `oracle_gamma` the feedback vector is taken as given and a
//! single selection pass runs.

use ndarray::{Array1, Array2};

use crate::error::{GlarmaError, Result};
use crate::model::log_likelihood;
use crate::newton::{estimate_gamma, NewtonConfig};
use crate::panel::PanelData;
use crate::params::GlarmaParams;
use crate::rng::derive_seed_n;
use crate::select::{build_quadratic_problem, lambda_grid, stability_selection};

/// Stream label for stability seeds of outer iterations past the first.
const STREAM_OUTER: u64 = 0x4f55_5445; // "OUTE"

#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Feedback lag order; 0 fits the pure GLM model.
    pub q: usize,
    /// Thresholds reported by the selection stage.
    pub thresholds: Vec<f64>,
    /// Threshold defining the refit support.
    pub primary_threshold: f64,
    pub max_outer_iter: usize,
    /// Sup-norm stabilisation tolerance on successive feedback estimates.
    /// Zero forces all `max_outer_iter` iterations.
    pub gamma_stab_tol: f64,
    /// Fixed feedback vector; skips the Newton stage when present.
    pub oracle_gamma: Option<Array1<f64>>,
    pub newton: NewtonConfig,
    pub n_subsamples: usize,
    pub seed: u64,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
}

pub fn default_thresholds() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            q: 1,
            thresholds: default_thresholds(),
            primary_threshold: 0.6,
            max_outer_iter: 5,
            gamma_stab_tol: 1e-3,
            oracle_gamma: None,
            newton: NewtonConfig::default(),
            n_subsamples: 1000,
            seed: 0,
            n_lambda: 100,
            lambda_ratio: 1e-4,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if !self
            .thresholds
            .iter()
            .all(|&t| t > 0.0 && t < 1.0 && t.is_finite())
        {
            return Err(GlarmaError::InvalidConfig(
                "thresholds must lie strictly inside (0, 1)".into(),
            ));
        }
        if !(self.primary_threshold > 0.0 && self.primary_threshold < 1.0) {
            return Err(GlarmaError::InvalidConfig(
                "primary threshold must lie strictly inside (0, 1)".into(),
            ));
        }
        if self.max_outer_iter == 0 {
            return Err(GlarmaError::InvalidConfig("max_outer_iter must be >= 1".into()));
        }
        if let Some(g) = &self.oracle_gamma {
            if g.len() != self.q {
                return Err(GlarmaError::InvalidConfig(format!(
                    "oracle gamma has length {}, expected q = {}",
                    g.len(),
                    self.q
                )));
            }
        }
        Ok(())
    }
}

/// One outer iteration record.
#[derive(Debug, Clone)]
pub struct OuterIteration {
    pub gamma: Array1<f64>,
    pub support_size: usize,
    pub loglik: f64,
    pub newton_converged: bool,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Refit coefficients of the final iteration; zeros off the support.
    pub eta_hat: Array2<f64>,
    pub gamma_hat: Array1<f64>,
    /// Selection frequencies of the final iteration.
    pub frequencies: Array1<f64>,
    pub outer_trace: Vec<OuterIteration>,
    /// Whether the feedback estimate stabilised before the iteration cap.
    pub converged: bool,
    pub lambda_used: f64,
    pub empty_support: bool,
    pub thresholds: Vec<f64>,
    pub primary_threshold: f64,
}

impl FitResult {
    /// Support (flat coefficient indices) at an arbitrary threshold.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.frequencies
            .iter()
            .enumerate()
            .filter(|(_, &f)| f > threshold)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Initial coefficient matrix: the saturated GLM estimate `log(mean count)`
/// per cell, with all-zero cells set to `log(1 / (2 n_i))`.
pub fn init_eta(data: &PanelData) -> Array2<f64> {
    let t_len = data.series_len();
    let mut eta = Array2::<f64>::zeros((data.n_conditions(), t_len));
    for i in 0..data.n_conditions() {
        let block = data.condition(i);
        let n = block.nrows() as f64;
        for t in 0..t_len {
            let mean = block.column(t).sum() / n;
            eta[[i, t]] = if mean > 0.0 {
                mean.ln()
            } else {
                (1.0 / (2.0 * n)).ln()
            };
        }
    }
    eta
}

/// Runs the full two-stage procedure.
pub fn fit(data: &PanelData, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let t_len = data.series_len();
    let n_cond = data.n_conditions();

    let mut eta_input = init_eta(data);
    let mut gamma_prev = match &cfg.oracle_gamma {
        Some(g) => g.clone(),
        None => Array1::zeros(cfg.q),
    };

    let mut trace: Vec<OuterIteration> = Vec::new();
    let mut converged = false;
    let mut last = None;

    for k in 1..=cfg.max_outer_iter {
        let (gamma_k, newton_converged, newton_iterations) = if cfg.q == 0 {
            (Array1::zeros(0), true, 0)
        } else if let Some(g) = &cfg.oracle_gamma {
            (g.clone(), true, 0)
        } else {
            let (g, tr) = estimate_gamma(&eta_input, &gamma_prev, data, &cfg.newton)?;
            (g, tr.converged, tr.iterations)
        };

        let problem = build_quadratic_problem(&eta_input, &gamma_k, data)?;
        let grid = lambda_grid(&problem, cfg.n_lambda, cfg.lambda_ratio);
        let lambda = *grid.last().expect("grid is never empty");
        let stab_seed = if k == 1 {
            cfg.seed
        } else {
            derive_seed_n(cfg.seed, &[STREAM_OUTER, k as u64])
        };
        let stab = stability_selection(
            &problem,
            lambda,
            cfg.n_subsamples,
            stab_seed,
            cfg.primary_threshold,
        )?;

        let eta_hat = Array2::from_shape_vec((n_cond, t_len), stab.eta_hat.to_vec())
            .expect("coefficient vector has length I * T");
        let loglik = log_likelihood(
            &GlarmaParams::new(eta_hat.clone(), gamma_k.clone())?,
            data,
        )?;

        trace.push(OuterIteration {
            gamma: gamma_k.clone(),
            support_size: stab.primary_support().len(),
            loglik,
            newton_converged,
            newton_iterations,
        });

        let delta = gamma_k
            .iter()
            .zip(gamma_prev.iter())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()));

        last = Some((stab, eta_hat, gamma_k.clone()));

        if delta < cfg.gamma_stab_tol {
            converged = true;
            break;
        }
        let (_, ref eta_new, ref gamma_new) = *last.as_ref().expect("just set");
        eta_input = eta_new.clone();
        gamma_prev = gamma_new.clone();
    }

    let (stab, eta_hat, gamma_hat) = last.expect("at least one outer iteration ran");
    Ok(FitResult {
        eta_hat,
        gamma_hat,
        frequencies: stab.frequencies,
        outer_trace: trace,
        converged,
        lambda_used: stab.lambda_used,
        empty_support: stab.empty_support,
        thresholds: cfg.thresholds.clone(),
        primary_threshold: cfg.primary_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{gen_eta_star, simulate_panel, SimScenario};
    use ndarray::array;

    #[test]
    fn init_eta_examples() {
        // Cell counts {2, 4} over two replicates: log 3.
        let data = PanelData::new(vec![array![[2.0], [4.0]]]).unwrap();
        let eta = init_eta(&data);
        assert!((eta[[0, 0]] - 3.0f64.ln()).abs() < 1e-12);

        // All-zero cell with three replicates: log(1/6).
        let data = PanelData::new(vec![array![[0.0], [0.0], [0.0]]]).unwrap();
        let eta = init_eta(&data);
        assert!((eta[[0, 0]] - (1.0 / 6.0f64).ln()).abs() < 1e-12);

        // Single replicate with count 1: exactly zero.
        let data = PanelData::new(vec![array![[1.0]]]).unwrap();
        let eta = init_eta(&data);
        assert_eq!(eta[[0, 0]], 0.0);
    }

    fn small_scenario(seed: u64) -> (SimScenario, Array2<f64>, PanelData) {
        let scenario = SimScenario {
            t_len: 12,
            n_reps_per_condition: 15,
            n_conditions: 2,
            gamma_star: array![0.4],
            n_nonnull: 4,
            seed,
            ..SimScenario::default()
        };
        let eta_star = gen_eta_star(&scenario, seed);
        let data = simulate_panel(&scenario, &eta_star, seed).unwrap();
        (scenario, eta_star, data)
    }

    #[test]
    fn support_matches_frequencies_above_primary_threshold() {
        let (_, _, data) = small_scenario(3);
        let cfg = FitConfig {
            q: 1,
            n_subsamples: 150,
            seed: 7,
            max_outer_iter: 2,
            ..FitConfig::default()
        };
        let fit_res = fit(&data, &cfg).unwrap();
        let t_len = data.series_len();
        for (flat, &f) in fit_res.frequencies.iter().enumerate() {
            let (i, t) = (flat / t_len, flat % t_len);
            if f > cfg.primary_threshold {
                assert!(fit_res.eta_hat[[i, t]] != 0.0 || fit_res.empty_support);
            } else {
                assert_eq!(fit_res.eta_hat[[i, t]], 0.0);
            }
        }
    }

    #[test]
    fn oracle_gamma_runs_one_selection_pass_matching_direct_call() {
        let (_, _, data) = small_scenario(4);
        let gamma_star = array![0.4];
        let cfg = FitConfig {
            q: 1,
            oracle_gamma: Some(gamma_star.clone()),
            n_subsamples: 200,
            seed: 11,
            ..FitConfig::default()
        };
        let fit_res = fit(&data, &cfg).unwrap();
        assert_eq!(fit_res.outer_trace.len(), 1);
        assert!(fit_res.converged);

        // Bit-exact agreement with the selection stage run directly at the
        // same feedback vector and seed.
        let eta0 = init_eta(&data);
        let problem = build_quadratic_problem(&eta0, &gamma_star, &data).unwrap();
        let grid = lambda_grid(&problem, cfg.n_lambda, cfg.lambda_ratio);
        let stab = stability_selection(&problem, *grid.last().unwrap(), 200, 11, 0.6).unwrap();
        assert_eq!(fit_res.frequencies, stab.frequencies);
        assert_eq!(
            fit_res.eta_hat.iter().copied().collect::<Vec<_>>(),
            stab.eta_hat.to_vec()
        );
    }

    #[test]
    fn q_zero_is_single_glm_selection_pass() {
        let (_, _, data) = small_scenario(5);
        let cfg = FitConfig {
            q: 0,
            n_subsamples: 100,
            seed: 2,
            ..FitConfig::default()
        };
        let fit_res = fit(&data, &cfg).unwrap();
        assert_eq!(fit_res.gamma_hat.len(), 0);
        assert_eq!(fit_res.outer_trace.len(), 1);
        assert!(fit_res.converged);
    }

    #[test]
    fn fits_are_deterministic() {
        let (_, _, data) = small_scenario(6);
        let cfg = FitConfig {
            q: 1,
            n_subsamples: 120,
            seed: 9,
            max_outer_iter: 3,
            ..FitConfig::default()
        };
        let a = fit(&data, &cfg).unwrap();
        let b = fit(&data, &cfg).unwrap();
        assert_eq!(a.eta_hat, b.eta_hat);
        assert_eq!(a.gamma_hat, b.gamma_hat);
        assert_eq!(a.frequencies, b.frequencies);
        assert_eq!(a.outer_trace.len(), b.outer_trace.len());
    }

    #[test]
    fn zero_stab_tol_forces_all_outer_iterations() {
        let (_, _, data) = small_scenario(8);
        let cfg = FitConfig {
            q: 1,
            n_subsamples: 80,
            seed: 1,
            max_outer_iter: 3,
            gamma_stab_tol: 0.0,
            ..FitConfig::default()
        };
        let fit_res = fit(&data, &cfg).unwrap();
        assert_eq!(fit_res.outer_trace.len(), 3);
        assert!(!fit_res.converged);
    }

    #[test]
    fn config_validation_rejects_bad_thresholds() {
        let (_, _, data) = small_scenario(9);
        let cfg = FitConfig {
            thresholds: vec![0.0, 0.5],
            ..FitConfig::default()
        };
        assert!(fit(&data, &cfg).is_err());
        let cfg = FitConfig {
            oracle_gamma: Some(array![0.1, 0.2]),
            q: 1,
            ..FitConfig::default()
        };
        assert!(fit(&data, &cfg).is_err());
    }
}
