//! Synthetic panel generation and the benchmark harness.

mod baseline;
mod experiment;
mod metrics;

pub use baseline::{poisson_lasso_baseline, BaselineConfig, BaselineResult};
pub use experiment::{
    mean_se, run_experiment, ExperimentConfig, ExperimentResult, Method, MethodOutcome,
};
pub use metrics::{support_metrics, SupportMetrics, ThresholdMetric};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{GlarmaError, Result};
use crate::model::W_CLAMP;
use crate::panel::PanelData;
use crate::rng::{rng_for, sample_indices};

const STREAM_ETA_STAR: u64 = 0x4554_4131;
const STREAM_PANEL: u64 = 0x5041_4e4c;

/// Sign policy for the non-null coefficients of the generating matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignPolicy {
    /// Each non-null coefficient gets an independent random sign.
    RandomSign,
    AllPositive,
}

/// One simulation setting: dimensions, the true feedback vector, and how the
/// sparse generating coefficients are drawn.
#[derive(Debug, Clone)]
pub struct SimScenario {
    pub t_len: usize,
    /// Replicates per condition (`J`; all conditions share it here).
    pub n_reps_per_condition: usize,
    pub n_conditions: usize,
    pub gamma_star: Array1<f64>,
    pub n_nonnull: usize,
    pub magnitude_range: (f64, f64),
    pub sign_policy: SignPolicy,
    /// Number of simulation replicates in an experiment run.
    pub n_sim_reps: usize,
    pub seed: u64,
}

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            t_len: 50,
            n_reps_per_condition: 10,
            n_conditions: 3,
            gamma_star: ndarray::array![0.5],
            n_nonnull: 10,
            magnitude_range: (0.41, 2.62),
            sign_policy: SignPolicy::RandomSign,
            n_sim_reps: 50,
            seed: 0,
        }
    }
}

impl SimScenario {
    pub fn q_star(&self) -> usize {
        self.gamma_star.len()
    }

    pub fn n_coeffs(&self) -> usize {
        self.n_conditions * self.t_len
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_len == 0 || self.n_conditions == 0 || self.n_reps_per_condition == 0 {
            return Err(GlarmaError::InvalidConfig("scenario dimensions must be positive".into()));
        }
        if self.n_nonnull > self.n_coeffs() {
            return Err(GlarmaError::InvalidConfig(format!(
                "n_nonnull = {} exceeds I * T = {}",
                self.n_nonnull,
                self.n_coeffs()
            )));
        }
        if !(self.magnitude_range.0 > 0.0 && self.magnitude_range.1 >= self.magnitude_range.0) {
            return Err(GlarmaError::InvalidConfig("magnitude range must be positive".into()));
        }
        Ok(())
    }
}

/// Draws a sparse generating coefficient matrix: `n_nonnull` positions
/// uniform without replacement, magnitudes uniform on the configured range,
/// signs per policy.
pub fn gen_eta_star(scenario: &SimScenario, rep_seed: u64) -> Array2<f64> {
    let mut rng = rng_for(rep_seed, &[STREAM_ETA_STAR]);
    let p = scenario.n_coeffs();
    let t_len = scenario.t_len;
    let mut eta = Array2::<f64>::zeros((scenario.n_conditions, t_len));
    let positions = sample_indices(&mut rng, p, scenario.n_nonnull);
    let (lo, hi) = scenario.magnitude_range;
    for &flat in &positions {
        let magnitude = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let sign = match scenario.sign_policy {
            SignPolicy::AllPositive => 1.0,
            SignPolicy::RandomSign => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        eta[[flat / t_len, flat % t_len]] = sign * magnitude;
    }
    eta
}

/// Generates a panel from the model, sequentially per series: the state is
/// built from past working residuals, the count drawn Poisson, the residual
/// updated. Returns the panel and the number of clamp events.
pub fn simulate_panel_with_clamps(
    scenario: &SimScenario,
    eta_star: &Array2<f64>,
    rep_seed: u64,
) -> Result<(PanelData, usize)> {
    scenario.validate()?;
    if eta_star.nrows() != scenario.n_conditions || eta_star.ncols() != scenario.t_len {
        return Err(GlarmaError::DimensionMismatch(format!(
            "eta_star is {}x{}, scenario needs {}x{}",
            eta_star.nrows(),
            eta_star.ncols(),
            scenario.n_conditions,
            scenario.t_len
        )));
    }
    let q = scenario.q_star();
    let gamma = &scenario.gamma_star;
    let t_len = scenario.t_len;
    let mut clamp_events = 0usize;

    let mut blocks = Vec::with_capacity(scenario.n_conditions);
    for i in 0..scenario.n_conditions {
        let mut block = Array2::<f64>::zeros((scenario.n_reps_per_condition, t_len));
        for j in 0..scenario.n_reps_per_condition {
            let mut rng = rng_for(rep_seed, &[STREAM_PANEL, i as u64, j as u64]);
            let mut resid = vec![0.0f64; t_len];
            for s in 0..t_len {
                let mut z = 0.0;
                for k in 1..=q.min(s) {
                    z += gamma[k - 1] * resid[s - k];
                }
                let raw = eta_star[[i, s]] + z;
                let w = raw.clamp(-W_CLAMP, W_CLAMP);
                if w != raw {
                    clamp_events += 1;
                }
                let mu = w.exp();
                let y = Poisson::new(mu)
                    .expect("positive mean")
                    .sample(&mut rng)
                    .round();
                block[[j, s]] = y;
                resid[s] = y * (-w).exp() - 1.0;
            }
        }
        blocks.push(block);
    }

    Ok((PanelData::new(blocks)?, clamp_events))
}

/// [`simulate_panel_with_clamps`] without the clamp counter.
pub fn simulate_panel(
    scenario: &SimScenario,
    eta_star: &Array2<f64>,
    rep_seed: u64,
) -> Result<PanelData> {
    simulate_panel_with_clamps(scenario, eta_star, rep_seed).map(|(p, _)| p)
}
