//! GLARMA model state and conditional likelihood derivatives.
//!
//! The latent state of series `(i, j)` is
//!
//! `W_t = eta_{i,t} + sum_{k=1..q} gamma_k * E_{t-k}`,
//!
//! where `E_t = Y_t * exp(-W_t) - 1` is the working residual and `E_t = 0`
//! for `t <= 0`. Counts are conditionally Poisson with mean `exp(W_t)`, so
//! the conditional log-likelihood is `L = sum (Y_t * W_t - exp(W_t))`.
//!
//! Scores and Hessians with respect to both `gamma` and `eta` follow from
//! the recursions of the first and second derivatives of `W`:
//!
//! `dW_t/dx = d(eta_{i,t})/dx + [E_{t-q0} if x = gamma_{q0}]
//!            - sum_k gamma_k (1 + E_{t-k}) dW_{t-k}/dx`
//!
//! and the analogous second-order forms, using `dE_t/dx = -(1 + E_t) dW_t/dx`.
//! Derivatives with respect to `eta_{i0,t0}` vanish unless `i0 = i` and
//! `t0 <= t`, which makes the coefficient Hessian exactly block-diagonal by
//! condition; the blocks are accumulated directly without materializing the
//! four-index tensor.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, Array3};
use rayon::prelude::*;

use crate::error::{GlarmaError, Result};
use crate::panel::PanelData;
use crate::params::GlarmaParams;

/// Symmetric bound applied to `W` before exponentiation. `exp(50)` already
/// exceeds any realistic count mean; the bound keeps Newton steps recoverable
/// instead of overflowing.
pub const W_CLAMP: f64 = 50.0;

/// Filled state of the forward recursion: `W`, the working residuals `E`,
/// and the number of clamp events (never silent).
#[derive(Debug, Clone)]
pub struct RecursionWorkspace {
    w: Vec<Array2<f64>>,
    e: Vec<Array2<f64>>,
    clamp_events: usize,
}

impl RecursionWorkspace {
    /// State matrix `(n_i, T)` for condition `i`.
    pub fn w(&self, i: usize) -> &Array2<f64> {
        &self.w[i]
    }

    /// Working residual matrix `(n_i, T)` for condition `i`.
    pub fn e(&self, i: usize) -> &Array2<f64> {
        &self.e[i]
    }

    /// Number of positions where `W` hit the clamp bound.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }
}

/// Runs the coupled `W`/`E` recursion in a single pass per series.
pub fn forward_recursion(params: &GlarmaParams, data: &PanelData) -> Result<RecursionWorkspace> {
    params.check_shape(data)?;
    let q = params.q();
    let gamma = params.gamma();
    let t_len = data.series_len();

    let mut w_all = Vec::with_capacity(data.n_conditions());
    let mut e_all = Vec::with_capacity(data.n_conditions());
    let mut clamp_events = 0usize;

    for i in 0..data.n_conditions() {
        let counts = data.condition(i);
        let n = counts.nrows();
        let mut w = Array2::<f64>::zeros((n, t_len));
        let mut e = Array2::<f64>::zeros((n, t_len));
        for j in 0..n {
            for s in 0..t_len {
                let mut z = 0.0;
                for k in 1..=q.min(s) {
                    z += gamma[k - 1] * e[[j, s - k]];
                }
                let raw = params.eta()[[i, s]] + z;
                if !raw.is_finite() {
                    return Err(GlarmaError::NonFiniteState {
                        condition: i,
                        replicate: j,
                        position: s,
                    });
                }
                let clamped = raw.clamp(-W_CLAMP, W_CLAMP);
                if clamped != raw {
                    clamp_events += 1;
                }
                w[[j, s]] = clamped;
                e[[j, s]] = counts[[j, s]] * (-clamped).exp() - 1.0;
            }
        }
        w_all.push(w);
        e_all.push(e);
    }

    Ok(RecursionWorkspace {
        w: w_all,
        e: e_all,
        clamp_events,
    })
}

/// Conditional log-likelihood from a filled workspace.
pub fn log_likelihood_from(ws: &RecursionWorkspace, data: &PanelData) -> f64 {
    let mut total = 0.0;
    for i in 0..data.n_conditions() {
        let counts = data.condition(i);
        let w = &ws.w[i];
        for j in 0..counts.nrows() {
            for s in 0..counts.ncols() {
                total += counts[[j, s]] * w[[j, s]] - w[[j, s]].exp();
            }
        }
    }
    total
}

/// Conditional log-likelihood `sum (Y W - exp(W))`.
pub fn log_likelihood(params: &GlarmaParams, data: &PanelData) -> Result<f64> {
    let ws = forward_recursion(params, data)?;
    Ok(log_likelihood_from(&ws, data))
}

// ---------------------------------------------------------------------------
// Derivative recursions with respect to gamma
// ---------------------------------------------------------------------------

/// First derivatives `dW_t/dgamma_{k0}` for one replicate series, shape
/// `(T, q)`.
pub fn gamma_first_derivs_series(
    params: &GlarmaParams,
    ws: &RecursionWorkspace,
    i: usize,
    j: usize,
) -> Array2<f64> {
    let e_row: Vec<f64> = ws.e[i].row(j).to_vec();
    Array2::from_shape_vec(
        (e_row.len(), params.q()),
        gamma_first_derivs_row(params.gamma(), &e_row),
    )
    .expect("shape")
}

/// Second derivatives `d2W_t/dgamma_{k0} dgamma_{k1}` for one replicate
/// series, shape `(T, q, q)`.
pub fn gamma_second_derivs_series(
    params: &GlarmaParams,
    ws: &RecursionWorkspace,
    i: usize,
    j: usize,
) -> Array3<f64> {
    let e_row: Vec<f64> = ws.e[i].row(j).to_vec();
    let q = params.q();
    let dw = gamma_first_derivs_row(params.gamma(), &e_row);
    let d2w = gamma_second_derivs_row(params.gamma(), &e_row, &dw);
    Array3::from_shape_vec((e_row.len(), q, q), d2w).expect("shape")
}

/// Row-major `[s * q + k0]` first-derivative recursion for one series.
fn gamma_first_derivs_row(gamma: &Array1<f64>, e_row: &[f64]) -> Vec<f64> {
    let q = gamma.len();
    let t_len = e_row.len();
    let mut dw = vec![0.0f64; t_len * q];
    for s in 0..t_len {
        for k0 in 0..q {
            let mut v = if s >= k0 + 1 { e_row[s - k0 - 1] } else { 0.0 };
            for k in 1..=q.min(s) {
                v -= gamma[k - 1] * (1.0 + e_row[s - k]) * dw[(s - k) * q + k0];
            }
            dw[s * q + k0] = v;
        }
    }
    dw
}

/// Row-major `[s * q * q + k0 * q + k1]` second-derivative recursion.
fn gamma_second_derivs_row(gamma: &Array1<f64>, e_row: &[f64], dw: &[f64]) -> Vec<f64> {
    let q = gamma.len();
    let t_len = e_row.len();
    let mut d2 = vec![0.0f64; t_len * q * q];
    for s in 0..t_len {
        for k0 in 0..q {
            for k1 in 0..q {
                let mut v = 0.0;
                if s >= k0 + 1 {
                    v -= (1.0 + e_row[s - k0 - 1]) * dw[(s - k0 - 1) * q + k1];
                }
                if s >= k1 + 1 {
                    v -= (1.0 + e_row[s - k1 - 1]) * dw[(s - k1 - 1) * q + k0];
                }
                for k in 1..=q.min(s) {
                    let c = gamma[k - 1] * (1.0 + e_row[s - k]);
                    v += c
                        * (dw[(s - k) * q + k0] * dw[(s - k) * q + k1]
                            - d2[(s - k) * q * q + k0 * q + k1]);
                }
                d2[s * q * q + k0 * q + k1] = v;
            }
        }
    }
    d2
}

/// Analytic score `dL/dgamma`, length `q`.
pub fn score_gamma(params: &GlarmaParams, data: &PanelData, ws: &RecursionWorkspace) -> Array1<f64> {
    let q = params.q();
    let mut score = Array1::<f64>::zeros(q);
    if q == 0 {
        return score;
    }
    for i in 0..data.n_conditions() {
        let counts = data.condition(i);
        for j in 0..counts.nrows() {
            let e_row: Vec<f64> = ws.e[i].row(j).to_vec();
            let dw = gamma_first_derivs_row(params.gamma(), &e_row);
            for s in 0..counts.ncols() {
                let resid = counts[[j, s]] - ws.w[i][[j, s]].exp();
                for k0 in 0..q {
                    score[k0] += resid * dw[s * q + k0];
                }
            }
        }
    }
    score
}

/// Analytic Hessian `d2L/dgamma dgamma'`, symmetric `q x q`.
pub fn hessian_gamma(
    params: &GlarmaParams,
    data: &PanelData,
    ws: &RecursionWorkspace,
) -> Array2<f64> {
    gamma_score_hessian(params, data, ws).1
}

/// Score and Hessian with respect to `gamma` in one pass over the panel.
pub fn gamma_score_hessian(
    params: &GlarmaParams,
    data: &PanelData,
    ws: &RecursionWorkspace,
) -> (Array1<f64>, Array2<f64>) {
    let q = params.q();
    let mut score = Array1::<f64>::zeros(q);
    let mut hess = Array2::<f64>::zeros((q, q));
    if q == 0 {
        return (score, hess);
    }
    for i in 0..data.n_conditions() {
        let counts = data.condition(i);
        for j in 0..counts.nrows() {
            let e_row: Vec<f64> = ws.e[i].row(j).to_vec();
            let dw = gamma_first_derivs_row(params.gamma(), &e_row);
            let d2w = gamma_second_derivs_row(params.gamma(), &e_row, &dw);
            for s in 0..counts.ncols() {
                let mu = ws.w[i][[j, s]].exp();
                let resid = counts[[j, s]] - mu;
                for k0 in 0..q {
                    score[k0] += resid * dw[s * q + k0];
                    for k1 in 0..q {
                        hess[[k0, k1]] += resid * d2w[s * q * q + k0 * q + k1]
                            - mu * dw[s * q + k0] * dw[s * q + k1];
                    }
                }
            }
        }
    }
    (score, hess)
}

// ---------------------------------------------------------------------------
// Derivative recursions with respect to eta
// ---------------------------------------------------------------------------

/// Lower-triangular first derivatives `dW_t/deta_{i,t0}` (`t0 <= t`) of one
/// replicate series with respect to its own condition's coefficients.
#[derive(Debug, Clone)]
pub struct EtaFirstDerivs {
    tri: Vec<f64>,
    t_len: usize,
}

impl EtaFirstDerivs {
    pub fn compute(gamma: &Array1<f64>, e_row: &[f64]) -> Self {
        let q = gamma.len();
        let t_len = e_row.len();
        let mut tri = vec![0.0f64; t_len * (t_len + 1) / 2];
        for s in 0..t_len {
            let row_off = s * (s + 1) / 2;
            tri[row_off + s] = 1.0;
            for k in 1..=q.min(s) {
                let c = gamma[k - 1] * (1.0 + e_row[s - k]);
                let prev_off = (s - k) * (s - k + 1) / 2;
                for t0 in 0..=(s - k) {
                    tri[row_off + t0] -= c * tri[prev_off + t0];
                }
            }
        }
        Self { tri, t_len }
    }

    /// `dW_t/deta_{i,t0}`; zero when `t0 > t`.
    pub fn get(&self, t: usize, t0: usize) -> f64 {
        if t0 > t {
            0.0
        } else {
            self.tri[t * (t + 1) / 2 + t0]
        }
    }

    /// Entries `t0 = 0..=t` of level `t`.
    pub fn row(&self, t: usize) -> &[f64] {
        let off = t * (t + 1) / 2;
        &self.tri[off..off + t + 1]
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }
}

/// First derivatives of `W` for series `(i, j)`.
pub fn eta_first_derivs_series(
    params: &GlarmaParams,
    ws: &RecursionWorkspace,
    i: usize,
    j: usize,
) -> EtaFirstDerivs {
    let e_row: Vec<f64> = ws.e[i].row(j).to_vec();
    EtaFirstDerivs::compute(params.gamma(), &e_row)
}

/// Rolling second-derivative recursion: keeps the last `q` triangular levels
/// of `d2W_t/deta_{t0} deta_{t1}` so the Hessian contraction never holds the
/// full four-index tensor.
struct EtaSecondRecursion {
    levels: VecDeque<Vec<f64>>,
    spare: Vec<f64>,
    q: usize,
}

impl EtaSecondRecursion {
    fn new(t_len: usize, q: usize) -> Self {
        let tri_size = t_len * (t_len + 1) / 2;
        Self {
            levels: VecDeque::with_capacity(q),
            spare: vec![0.0; tri_size],
            q,
        }
    }

    /// Advances to level `s` (levels must be visited in order from 0) and
    /// returns the symmetric triangle, valid for pairs `t0 <= t1 <= s - 1`.
    fn step(&mut self, s: usize, gamma: &Array1<f64>, e_row: &[f64], first: &EtaFirstDerivs) -> &[f64] {
        let mut cur = std::mem::take(&mut self.spare);
        let used = s * (s + 1) / 2;
        for v in cur[..used].iter_mut() {
            *v = 0.0;
        }
        for k in 1..=self.q.min(s) {
            let m = s - k;
            let c = gamma[k - 1] * (1.0 + e_row[m]);
            let prev = &self.levels[k - 1];
            let drow = first.row(m);
            // Rank-one part, supported on t0 <= t1 <= m.
            for t1 in 0..=m {
                let off = t1 * (t1 + 1) / 2;
                let cd = c * drow[t1];
                for t0 in 0..=t1 {
                    cur[off + t0] += cd * drow[t0];
                }
            }
            // Previous-level part; level m is supported on t0 <= t1 <= m - 1.
            for idx in 0..m * (m + 1) / 2 {
                cur[idx] -= c * prev[idx];
            }
        }
        self.levels.push_front(cur);
        if self.levels.len() > self.q {
            self.spare = self.levels.pop_back().expect("ring size");
        } else {
            self.spare = vec![0.0; self.levels[0].len()];
        }
        self.levels.front().expect("level").as_slice()
    }
}

/// Dense `d2W_t/deta_{i,t0} deta_{i,t1}` matrix at level `t` for series
/// `(i, j)`. Intended for small instances (verification of base cases);
/// the Hessian path streams these levels instead.
pub fn eta_second_level_series(
    params: &GlarmaParams,
    ws: &RecursionWorkspace,
    i: usize,
    j: usize,
    t: usize,
) -> Array2<f64> {
    let e_row: Vec<f64> = ws.e[i].row(j).to_vec();
    let t_len = e_row.len();
    assert!(t < t_len);
    let first = EtaFirstDerivs::compute(params.gamma(), &e_row);
    let mut out = Array2::<f64>::zeros((t_len, t_len));
    if params.q() == 0 {
        return out;
    }
    let mut rec = EtaSecondRecursion::new(t_len, params.q());
    for s in 0..=t {
        let lvl = rec.step(s, params.gamma(), &e_row, &first);
        if s == t {
            // Level t is supported on pairs t0 <= t1 <= t - 1.
            for t1 in 0..s {
                let off = t1 * (t1 + 1) / 2;
                for t0 in 0..=t1 {
                    out[[t0, t1]] = lvl[off + t0];
                    out[[t1, t0]] = lvl[off + t0];
                }
            }
        }
    }
    out
}

/// Analytic score `dL/deta`, length `I * T`, in condition-major layout.
/// Entry `(i0, t0)` only sums over cells of condition `i0`.
pub fn score_eta(params: &GlarmaParams, data: &PanelData, ws: &RecursionWorkspace) -> Array1<f64> {
    let t_len = data.series_len();
    let mut g = Array1::<f64>::zeros(data.n_coeffs());
    for i in 0..data.n_conditions() {
        let counts = data.condition(i);
        let base = i * t_len;
        for j in 0..counts.nrows() {
            let first = eta_first_derivs_series(params, ws, i, j);
            for s in 0..t_len {
                let resid = counts[[j, s]] - ws.w[i][[j, s]].exp();
                let drow = first.row(s);
                for t0 in 0..=s {
                    g[base + t0] += resid * drow[t0];
                }
            }
        }
    }
    g
}

/// The coefficient Hessian `d2L/deta deta'`, exactly block-diagonal across
/// conditions; only the `I` diagonal blocks of size `T x T` are stored.
#[derive(Debug, Clone)]
pub struct EtaHessian {
    blocks: Vec<Array2<f64>>,
}

impl EtaHessian {
    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Array2<f64> {
        &self.blocks[i]
    }

    /// Materializes the full `(I T) x (I T)` matrix; off-block entries are
    /// exact zeros.
    pub fn to_dense(&self) -> Array2<f64> {
        let t_len = self.blocks[0].nrows();
        let p = t_len * self.blocks.len();
        let mut dense = Array2::<f64>::zeros((p, p));
        for (i, block) in self.blocks.iter().enumerate() {
            let base = i * t_len;
            for t0 in 0..t_len {
                for t1 in 0..t_len {
                    dense[[base + t0, base + t1]] = block[[t0, t1]];
                }
            }
        }
        dense
    }
}

/// Computes the coefficient Hessian, streaming the second-derivative levels
/// per replicate. Replicates are processed in parallel and reduced in a fixed
/// order, so the result does not depend on the worker count.
pub fn hessian_eta(params: &GlarmaParams, data: &PanelData, ws: &RecursionWorkspace) -> EtaHessian {
    let t_len = data.series_len();
    let q = params.q();
    let tri_size = t_len * (t_len + 1) / 2;
    let mut blocks = Vec::with_capacity(data.n_conditions());

    for i in 0..data.n_conditions() {
        let counts = data.condition(i);
        let n = counts.nrows();
        let partials: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut tri = vec![0.0f64; tri_size];
                let e_row: Vec<f64> = ws.e[i].row(j).to_vec();
                let first = EtaFirstDerivs::compute(params.gamma(), &e_row);
                let mut rec = (q > 0).then(|| EtaSecondRecursion::new(t_len, q));
                for s in 0..t_len {
                    let mu = ws.w[i][[j, s]].exp();
                    let resid = counts[[j, s]] - mu;
                    if let Some(rec) = rec.as_mut() {
                        let lvl = rec.step(s, params.gamma(), &e_row, &first);
                        for (acc, &v) in tri[..s * (s + 1) / 2].iter_mut().zip(lvl) {
                            *acc += resid * v;
                        }
                    }
                    let drow = first.row(s);
                    for t1 in 0..=s {
                        let off = t1 * (t1 + 1) / 2;
                        let md = mu * drow[t1];
                        for t0 in 0..=t1 {
                            tri[off + t0] -= md * drow[t0];
                        }
                    }
                }
                tri
            })
            .collect();

        let mut total = vec![0.0f64; tri_size];
        for part in &partials {
            for (acc, &v) in total.iter_mut().zip(part) {
                *acc += v;
            }
        }
        let mut block = Array2::<f64>::zeros((t_len, t_len));
        for t1 in 0..t_len {
            let off = t1 * (t1 + 1) / 2;
            for t0 in 0..=t1 {
                block[[t0, t1]] = total[off + t0];
                block[[t1, t0]] = total[off + t0];
            }
        }
        blocks.push(block);
    }

    EtaHessian { blocks }
}
