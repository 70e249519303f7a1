//! Shared generators for unit tests.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::panel::PanelData;
use crate::params::GlarmaParams;

/// Draws a small well-conditioned instance: counts from Poisson(3),
/// `gamma` uniform in [-0.4, 0.6), `eta` uniform in [-1, 1).
pub(crate) fn random_instance(
    rng: &mut ChaCha8Rng,
    max_i: usize,
    max_j: usize,
    max_t: usize,
    max_q: usize,
) -> (GlarmaParams, PanelData) {
    let n_cond = rng.gen_range(1..=max_i);
    let t_len = rng.gen_range(2..=max_t.max(2));
    let q = rng.gen_range(1..=max_q.max(1));
    let pois = Poisson::new(3.0).unwrap();
    let mut blocks = Vec::new();
    for _ in 0..n_cond {
        let n = rng.gen_range(1..=max_j);
        let mut b = Array2::<f64>::zeros((n, t_len));
        for v in b.iter_mut() {
            *v = pois.sample(rng);
        }
        blocks.push(b);
    }
    let mut eta = Array2::<f64>::zeros((n_cond, t_len));
    for v in eta.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let mut gamma = Array1::<f64>::zeros(q);
    for v in gamma.iter_mut() {
        *v = rng.gen_range(-0.4..0.6);
    }
    (
        GlarmaParams::new(eta, gamma).unwrap(),
        PanelData::new(blocks).unwrap(),
    )
}
