//! Experiment runner: independent simulation replicates, each fitted by
//! every requested method on byte-identical data.

use ndarray::Array1;
use rayon::prelude::*;

use crate::newton::NewtonConfig;
use crate::pipeline::{default_thresholds, fit, FitConfig};
use crate::rng::derive_seed_n;

use super::baseline::{poisson_lasso_baseline, BaselineConfig};
use super::metrics::{support_metrics, SupportMetrics};
use super::{gen_eta_star, simulate_panel_with_clamps, SimScenario};

const STREAM_REP: u64 = 0x5245_5031;
const STREAM_METHOD: u64 = 0x4d45_5448;

/// A fitting method entering the comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    /// The two-stage pipeline at the given lag order (0 = GLM selection).
    Pipeline { q: usize },
    /// The pipeline with the feedback vector fixed at its true value.
    OracleGamma,
    /// The per-position penalized Poisson regression.
    ClassicalLasso,
}

impl Method {
    pub fn tag(&self) -> String {
        match self {
            Method::Pipeline { q } => format!("q{q}"),
            Method::OracleGamma => "oracle".into(),
            Method::ClassicalLasso => "classical".into(),
        }
    }

    /// Parses tags of the form `q0`, `q1`, ..., `oracle`, `classical`.
    pub fn parse(tag: &str) -> Option<Method> {
        match tag {
            "oracle" => Some(Method::OracleGamma),
            "classical" => Some(Method::ClassicalLasso),
            _ => tag
                .strip_prefix('q')
                .and_then(|rest| rest.parse::<usize>().ok())
                .map(|q| Method::Pipeline { q }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: SimScenario,
    pub methods: Vec<Method>,
    pub thresholds: Vec<f64>,
    pub primary_threshold: f64,
    pub n_subsamples: usize,
    pub max_outer_iter: usize,
    pub gamma_stab_tol: f64,
    pub newton: NewtonConfig,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
}

impl ExperimentConfig {
    pub fn new(scenario: SimScenario, methods: Vec<Method>) -> Self {
        Self {
            scenario,
            methods,
            thresholds: default_thresholds(),
            primary_threshold: 0.6,
            n_subsamples: 1000,
            max_outer_iter: 5,
            gamma_stab_tol: 1e-3,
            newton: NewtonConfig::default(),
            n_lambda: 100,
            lambda_ratio: 1e-4,
        }
    }
}

/// Result of one method on one replicate.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub rep: usize,
    pub method: String,
    pub metrics: Option<SupportMetrics>,
    /// Feedback estimate per outer iteration (empty for the classical
    /// baseline).
    pub gamma_per_outer: Vec<Array1<f64>>,
    pub wall_secs: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub outcomes: Vec<MethodOutcome>,
    pub thresholds: Vec<f64>,
    pub n_reps: usize,
    pub clamp_events: usize,
}

impl ExperimentResult {
    /// Per-replicate `max(TPR - FPR)` values of one method.
    pub fn max_diffs(&self, tag: &str) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter(|o| o.method == tag)
            .filter_map(|o| o.metrics.as_ref().and_then(|m| m.max_tpr_minus_fpr))
            .collect()
    }

    /// Mean and standard error of `max(TPR - FPR)` for one method.
    pub fn mean_max_diff(&self, tag: &str) -> Option<(f64, f64, usize)> {
        let vals = self.max_diffs(tag);
        mean_se(&vals).map(|(m, se)| (m, se, vals.len()))
    }

    /// Feedback estimates of one method at a given outer iteration (1-based),
    /// one entry per replicate that reached it.
    pub fn gamma_at_iteration(&self, tag: &str, outer: usize, lag: usize) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter(|o| o.method == tag && o.error.is_none())
            .filter_map(|o| o.gamma_per_outer.get(outer - 1))
            .filter_map(|g| g.get(lag).copied())
            .collect()
    }
}

pub fn mean_se(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// Runs the experiment: every replicate simulates a fresh generating matrix
/// and panel; all methods of that replicate see byte-identical data.
/// Per-replicate failures are recorded in the outcome, not raised.
pub fn run_experiment(cfg: &ExperimentConfig) -> crate::error::Result<ExperimentResult> {
    cfg.scenario.validate()?;
    let n_reps = cfg.scenario.n_sim_reps;

    let rep_results: Vec<(Vec<MethodOutcome>, usize)> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed_n(cfg.scenario.seed, &[STREAM_REP, rep as u64]);
            let eta_star = gen_eta_star(&cfg.scenario, rep_seed);
            let (data, clamps) =
                match simulate_panel_with_clamps(&cfg.scenario, &eta_star, rep_seed) {
                    Ok(pair) => pair,
                    Err(e) => {
                        let outcomes = cfg
                            .methods
                            .iter()
                            .map(|m| MethodOutcome {
                                rep,
                                method: m.tag(),
                                metrics: None,
                                gamma_per_outer: Vec::new(),
                                wall_secs: 0.0,
                                error: Some(format!("simulation failed: {e}")),
                            })
                            .collect();
                        return (outcomes, 0);
                    }
                };

            let outcomes = cfg
                .methods
                .iter()
                .enumerate()
                .map(|(mi, method)| {
                    let seed = derive_seed_n(rep_seed, &[STREAM_METHOD, mi as u64]);
                    let start = std::time::Instant::now();
                    let (metrics, gammas, error) = run_method(cfg, method, &data, &eta_star, seed);
                    MethodOutcome {
                        rep,
                        method: method.tag(),
                        metrics,
                        gamma_per_outer: gammas,
                        wall_secs: start.elapsed().as_secs_f64(),
                        error,
                    }
                })
                .collect();
            (outcomes, clamps)
        })
        .collect();

    let mut outcomes = Vec::with_capacity(n_reps * cfg.methods.len());
    let mut clamp_events = 0usize;
    for (o, c) in rep_results {
        outcomes.extend(o);
        clamp_events += c;
    }
    Ok(ExperimentResult {
        outcomes,
        thresholds: cfg.thresholds.clone(),
        n_reps,
        clamp_events,
    })
}

fn run_method(
    cfg: &ExperimentConfig,
    method: &Method,
    data: &crate::panel::PanelData,
    eta_star: &ndarray::Array2<f64>,
    seed: u64,
) -> (Option<SupportMetrics>, Vec<Array1<f64>>, Option<String>) {
    if let Method::ClassicalLasso = method {
        let base_cfg = BaselineConfig {
            n_subsamples: cfg.n_subsamples,
            seed,
            n_lambda: cfg.n_lambda,
            lambda_ratio: cfg.lambda_ratio,
            primary_threshold: cfg.primary_threshold,
            ..BaselineConfig::default()
        };
        let res = poisson_lasso_baseline(data, &base_cfg);
        let metrics = support_metrics(
            &res.frequencies,
            &res.eta_hat,
            eta_star,
            &cfg.thresholds,
            cfg.primary_threshold,
        );
        return (Some(metrics), Vec::new(), None);
    }

    let (q, oracle) = match method {
        Method::Pipeline { q } => (*q, None),
        Method::OracleGamma => (cfg.scenario.q_star(), Some(cfg.scenario.gamma_star.clone())),
        Method::ClassicalLasso => unreachable!("handled above"),
    };
    let fit_cfg = FitConfig {
        q,
        thresholds: cfg.thresholds.clone(),
        primary_threshold: cfg.primary_threshold,
        max_outer_iter: cfg.max_outer_iter,
        gamma_stab_tol: cfg.gamma_stab_tol,
        oracle_gamma: oracle,
        newton: cfg.newton.clone(),
        n_subsamples: cfg.n_subsamples,
        seed,
        n_lambda: cfg.n_lambda,
        lambda_ratio: cfg.lambda_ratio,
    };
    match fit(data, &fit_cfg) {
        Ok(res) => {
            let metrics = support_metrics(
                &res.frequencies,
                &res.eta_hat,
                eta_star,
                &cfg.thresholds,
                cfg.primary_threshold,
            );
            let gammas = res.outer_trace.iter().map(|o| o.gamma.clone()).collect();
            (Some(metrics), gammas, None)
        }
        Err(e) => (None, Vec::new(), Some(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny_config() -> ExperimentConfig {
        let scenario = SimScenario {
            t_len: 8,
            n_reps_per_condition: 12,
            n_conditions: 2,
            gamma_star: array![0.4],
            n_nonnull: 3,
            n_sim_reps: 2,
            seed: 17,
            ..SimScenario::default()
        };
        let mut cfg = ExperimentConfig::new(
            scenario,
            vec![
                Method::Pipeline { q: 0 },
                Method::Pipeline { q: 1 },
                Method::OracleGamma,
                Method::ClassicalLasso,
            ],
        );
        cfg.n_subsamples = 60;
        cfg.max_outer_iter = 2;
        cfg
    }

    #[test]
    fn one_row_per_rep_method_pair() {
        let cfg = tiny_config();
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.outcomes.len(), 2 * 4);
        for o in &res.outcomes {
            assert!(o.error.is_none(), "{:?}", o.error);
            let m = o.metrics.as_ref().unwrap();
            assert_eq!(m.per_threshold.len(), 9);
            for tm in &m.per_threshold {
                if let Some(tpr) = tm.tpr {
                    assert!((0.0..=1.0).contains(&tpr));
                }
                assert!((0.0..=1.0).contains(&tm.fpr));
            }
        }
    }

    #[test]
    fn reruns_are_identical() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.outcomes.len(), b.outcomes.len());
        for (x, y) in a.outcomes.iter().zip(b.outcomes.iter()) {
            assert_eq!(x.method, y.method);
            assert_eq!(x.rep, y.rep);
            let (mx, my) = (x.metrics.as_ref().unwrap(), y.metrics.as_ref().unwrap());
            assert_eq!(mx.max_tpr_minus_fpr, my.max_tpr_minus_fpr);
            assert_eq!(mx.sign_tpr, my.sign_tpr);
            assert_eq!(x.gamma_per_outer, y.gamma_per_outer);
        }
    }

    #[test]
    fn method_tags_roundtrip() {
        for m in [
            Method::Pipeline { q: 0 },
            Method::Pipeline { q: 2 },
            Method::OracleGamma,
            Method::ClassicalLasso,
        ] {
            assert_eq!(Method::parse(&m.tag()), Some(m));
        }
        assert_eq!(Method::parse("bogus"), None);
    }

    #[test]
    fn mean_se_basics() {
        assert_eq!(mean_se(&[]), None);
        let (m, se) = mean_se(&[2.0]).unwrap();
        assert_eq!((m, se), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 3.0]).unwrap();
        assert!((m - 2.0).abs() < 1e-12);
        assert!((se - 1.0).abs() < 1e-12);
    }
}
