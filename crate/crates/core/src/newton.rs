//! Newton-Raphson estimation of the feedback coefficients with the
//! regression coefficients held fixed.
//!
//! The raw recursion `gamma <- gamma - H^{-1} s` is safeguarded in two ways:
//! the system is solved through an eigenvalue-floored pseudo-inverse of the
//! negated Hessian (directions with eigenvalue below `1e-10` times the
//! spectral radius are dropped), and a step is only accepted when it does not
//! decrease the log-likelihood, halving it up to `step_halving_max` times and
//! then retrying along the raw gradient before giving up on the iteration.

use ndarray::{Array1, Array2};

use crate::error::Result;
use crate::linalg::solve_sym_floored;
use crate::model::{forward_recursion, gamma_score_hessian, log_likelihood_from};
use crate::panel::PanelData;
use crate::params::GlarmaParams;

/// Floor for the pseudo-inverse, relative to the spectral radius.
const EIGEN_FLOOR_REL: f64 = 1e-10;

/// Absolute slack when testing that a step does not decrease the likelihood.
const ASCENT_SLACK: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NewtonConfig {
    /// Sup-norm threshold on successive iterates.
    pub tol: f64,
    pub max_iter: usize,
    pub step_halving_max: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            step_halving_max: 20,
        }
    }
}

/// Iteration record of one Newton run.
#[derive(Debug, Clone)]
pub struct NewtonTrace {
    pub gamma_path: Vec<Array1<f64>>,
    pub loglik_path: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Set when the Hessian solve dropped at least one eigendirection.
    pub pseudo_inverse_used: bool,
    /// Number of iterations that fell back to a scaled gradient step.
    pub gradient_fallbacks: usize,
}

/// Estimates `gamma` by safeguarded Newton-Raphson at fixed `eta0`.
///
/// Returns the first iterate whose sup-norm change is below `cfg.tol`, or the
/// best-likelihood iterate with `converged = false` after `cfg.max_iter`.
pub fn estimate_gamma(
    eta0: &Array2<f64>,
    gamma0: &Array1<f64>,
    data: &PanelData,
    cfg: &NewtonConfig,
) -> Result<(Array1<f64>, NewtonTrace)> {
    let q = gamma0.len();
    let mut params = GlarmaParams::new(eta0.clone(), gamma0.clone())?;
    let mut ws = forward_recursion(&params, data)?;
    let mut loglik = log_likelihood_from(&ws, data);

    let mut trace = NewtonTrace {
        gamma_path: vec![gamma0.clone()],
        loglik_path: vec![loglik],
        converged: false,
        iterations: 0,
        pseudo_inverse_used: false,
        gradient_fallbacks: 0,
    };

    if q == 0 {
        trace.converged = true;
        return Ok((Array1::zeros(0), trace));
    }

    for _ in 0..cfg.max_iter {
        let (score, hess) = gamma_score_hessian(&params, data, &ws);
        let neg_hess = hess.mapv(|v| -v);
        let (direction, dropped) = solve_sym_floored(&neg_hess, &score, EIGEN_FLOOR_REL);
        if dropped {
            trace.pseudo_inverse_used = true;
        }

        let gamma_old = params.gamma().clone();
        let mut accepted: Option<(GlarmaParams, crate::model::RecursionWorkspace, f64)> = None;

        // Newton step with halving.
        let mut scale = 1.0;
        for _ in 0..=cfg.step_halving_max {
            let candidate = &gamma_old + &(&direction * scale);
            if let Ok(p) = GlarmaParams::new(eta0.clone(), candidate) {
                if let Ok(w) = forward_recursion(&p, data) {
                    let l = log_likelihood_from(&w, data);
                    if l >= loglik - ASCENT_SLACK {
                        accepted = Some((p, w, l));
                        break;
                    }
                }
            }
            scale *= 0.5;
        }

        // Fall back to a scaled gradient ascent step.
        if accepted.is_none() {
            trace.gradient_fallbacks += 1;
            let radius = spectral_radius(&neg_hess);
            let mut scale = if radius > 0.0 { 1.0 / radius } else { 1.0 };
            for _ in 0..=cfg.step_halving_max {
                let candidate = &gamma_old + &(&score * scale);
                if let Ok(p) = GlarmaParams::new(eta0.clone(), candidate) {
                    if let Ok(w) = forward_recursion(&p, data) {
                        let l = log_likelihood_from(&w, data);
                        if l >= loglik - ASCENT_SLACK {
                            accepted = Some((p, w, l));
                            break;
                        }
                    }
                }
                scale *= 0.5;
            }
        }

        let (new_params, new_ws, new_loglik) = match accepted {
            Some(triple) => triple,
            // No direction improves the likelihood: numerically stationary.
            None => (params.clone(), ws, loglik),
        };

        let delta = sup_norm_diff(new_params.gamma(), &gamma_old);
        params = new_params;
        ws = new_ws;
        loglik = new_loglik;
        trace.iterations += 1;
        trace.gamma_path.push(params.gamma().clone());
        trace.loglik_path.push(loglik);

        if delta < cfg.tol {
            trace.converged = true;
            break;
        }
    }

    Ok((params.gamma().clone(), trace))
}

fn sup_norm_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (&x, &y)| acc.max((x - y).abs()))
}

fn spectral_radius(m: &Array2<f64>) -> f64 {
    crate::linalg::sym_eigen(m)
        .values
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_recursion, score_gamma};
    use crate::sim::{gen_eta_star, simulate_panel, SimScenario};
    use ndarray::array;

    #[test]
    fn empty_gamma_returns_immediately() {
        let eta = array![[0.1, 0.2]];
        let data = PanelData::new(vec![array![[1.0, 2.0]]]).unwrap();
        let (gamma, trace) =
            estimate_gamma(&eta, &Array1::zeros(0), &data, &NewtonConfig::default()).unwrap();
        assert_eq!(gamma.len(), 0);
        assert!(trace.converged);
        assert_eq!(trace.iterations, 0);
    }

    #[test]
    fn single_position_keeps_start_and_flags_pseudo_inverse() {
        // With T = 1 the score and Hessian are identically zero.
        let eta = array![[0.3]];
        let data = PanelData::new(vec![array![[2.0], [1.0]]]).unwrap();
        let gamma0 = array![0.25];
        let (gamma, trace) =
            estimate_gamma(&eta, &gamma0, &data, &NewtonConfig::default()).unwrap();
        assert_eq!(gamma, gamma0);
        assert!(trace.converged);
        assert!(trace.pseudo_inverse_used);
    }

    #[test]
    fn loglik_path_is_monotone() {
        let scenario = SimScenario {
            t_len: 30,
            n_reps_per_condition: 8,
            n_conditions: 2,
            gamma_star: array![0.4],
            n_nonnull: 6,
            ..SimScenario::default()
        };
        let eta_star = gen_eta_star(&scenario, 5);
        let data = simulate_panel(&scenario, &eta_star, 5).unwrap();
        let eta0 = crate::pipeline::init_eta(&data);
        let (_, trace) =
            estimate_gamma(&eta0, &array![0.0], &data, &NewtonConfig::default()).unwrap();
        for w in trace.loglik_path.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "likelihood decreased: {w:?}");
        }
        assert_eq!(trace.gamma_path.len(), trace.loglik_path.len());
    }

    #[test]
    fn fixed_point_is_stable() {
        let scenario = SimScenario {
            t_len: 40,
            n_reps_per_condition: 20,
            n_conditions: 2,
            gamma_star: array![0.5],
            n_nonnull: 5,
            ..SimScenario::default()
        };
        let eta_star = gen_eta_star(&scenario, 9);
        let data = simulate_panel(&scenario, &eta_star, 9).unwrap();
        let eta0 = crate::pipeline::init_eta(&data);
        let cfg = NewtonConfig::default();
        let (gamma_hat, trace) = estimate_gamma(&eta0, &array![0.0], &data, &cfg).unwrap();
        assert!(trace.converged);

        let params = GlarmaParams::new(eta0.clone(), gamma_hat.clone()).unwrap();
        let ws = forward_recursion(&params, &data).unwrap();
        let score = score_gamma(&params, &data, &ws);
        if score.iter().all(|v| v.abs() < 1e-8) {
            let (again, _) = estimate_gamma(&eta0, &gamma_hat, &data, &cfg).unwrap();
            assert!(sup_norm_diff(&again, &gamma_hat) < cfg.tol);
        }
    }

    #[test]
    fn identical_inputs_give_identical_traces() {
        let scenario = SimScenario {
            t_len: 25,
            n_reps_per_condition: 6,
            n_conditions: 3,
            gamma_star: array![0.3],
            n_nonnull: 4,
            ..SimScenario::default()
        };
        let eta_star = gen_eta_star(&scenario, 2);
        let data = simulate_panel(&scenario, &eta_star, 2).unwrap();
        let eta0 = crate::pipeline::init_eta(&data);
        let cfg = NewtonConfig::default();
        let (g1, t1) = estimate_gamma(&eta0, &array![0.0], &data, &cfg).unwrap();
        let (g2, t2) = estimate_gamma(&eta0, &array![0.0], &data, &cfg).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(t1.loglik_path, t2.loglik_path);
    }

    #[test]
    fn recovers_feedback_on_simulated_panel() {
        let scenario = SimScenario {
            t_len: 50,
            n_reps_per_condition: 50,
            n_conditions: 3,
            gamma_star: array![0.5],
            ..SimScenario::default()
        };
        let eta_star = gen_eta_star(&scenario, 11);
        let data = simulate_panel(&scenario, &eta_star, 11).unwrap();
        let eta0 = crate::pipeline::init_eta(&data);
        let (gamma_hat, trace) =
            estimate_gamma(&eta0, &array![0.0], &data, &NewtonConfig::default()).unwrap();
        assert!(trace.converged);
        assert!(
            (gamma_hat[0] - 0.5).abs() < 0.2,
            "gamma_hat = {}",
            gamma_hat[0]
        );
    }
}
