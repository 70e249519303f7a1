//! Support-recovery metrics against the generating coefficients.

use ndarray::{Array1, Array2};

/// TPR/FPR at one threshold. `tpr` is missing when there are no true
/// non-null coefficients.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdMetric {
    pub threshold: f64,
    pub tpr: Option<f64>,
    pub fpr: f64,
}

#[derive(Debug, Clone)]
pub struct SupportMetrics {
    pub per_threshold: Vec<ThresholdMetric>,
    /// Largest `TPR - FPR` over the thresholds.
    pub max_tpr_minus_fpr: Option<f64>,
    /// Fraction of all coefficients whose sign class {-, 0, +} is recovered,
    /// judged at the primary threshold.
    pub sign_tpr: f64,
    pub primary_threshold: f64,
}

fn sign_class(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Computes the per-threshold support metrics.
///
/// Supports come from `frequencies > threshold`; the sign comparison uses
/// the refit values `eta_hat` (zeros off the primary support).
pub fn support_metrics(
    frequencies: &Array1<f64>,
    eta_hat: &Array2<f64>,
    eta_star: &Array2<f64>,
    thresholds: &[f64],
    primary_threshold: f64,
) -> SupportMetrics {
    let p = frequencies.len();
    assert_eq!(p, eta_star.len());
    assert_eq!(p, eta_hat.len());
    let t_len = eta_star.ncols();

    let truth: Vec<bool> = (0..p)
        .map(|flat| eta_star[[flat / t_len, flat % t_len]] != 0.0)
        .collect();
    let n_true = truth.iter().filter(|&&b| b).count();
    let n_null = p - n_true;

    let mut per_threshold = Vec::with_capacity(thresholds.len());
    let mut max_diff: Option<f64> = None;
    for &thr in thresholds {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for flat in 0..p {
            if frequencies[flat] > thr {
                if truth[flat] {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        let tpr = (n_true > 0).then(|| tp as f64 / n_true as f64);
        let fpr = if n_null > 0 {
            fp as f64 / n_null as f64
        } else {
            0.0
        };
        if let Some(t) = tpr {
            let diff = t - fpr;
            max_diff = Some(max_diff.map_or(diff, |m: f64| m.max(diff)));
        }
        per_threshold.push(ThresholdMetric { threshold: thr, tpr, fpr });
    }

    let mut matches = 0usize;
    for flat in 0..p {
        let (i, t) = (flat / t_len, flat % t_len);
        let est = if frequencies[flat] > primary_threshold {
            sign_class(eta_hat[[i, t]])
        } else {
            0
        };
        if est == sign_class(eta_star[[i, t]]) {
            matches += 1;
        }
    }

    SupportMetrics {
        per_threshold,
        max_tpr_minus_fpr: max_diff,
        sign_tpr: matches as f64 / p as f64,
        primary_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn thresholds() -> Vec<f64> {
        crate::pipeline::default_thresholds()
    }

    #[test]
    fn perfect_recovery() {
        let eta_star = array![[1.0, 0.0, -2.0]];
        let eta_hat = array![[0.9, 0.0, -1.8]];
        let freq = Array1::from(vec![1.0, 0.0, 1.0]);
        let m = support_metrics(&freq, &eta_hat, &eta_star, &thresholds(), 0.6);
        for tm in &m.per_threshold {
            assert_eq!(tm.tpr, Some(1.0));
            assert_eq!(tm.fpr, 0.0);
        }
        assert_eq!(m.max_tpr_minus_fpr, Some(1.0));
        assert_eq!(m.sign_tpr, 1.0);
    }

    #[test]
    fn empty_estimate_over_sparse_truth() {
        // 10 true non-nulls among 150 coefficients, nothing selected:
        // TPR = 0, FPR = 0, sign accuracy 140/150.
        let t_len = 50;
        let mut eta_star = Array2::<f64>::zeros((3, t_len));
        for k in 0..10 {
            eta_star[[k % 3, (7 * k) % t_len]] = 1.0 + k as f64;
        }
        assert_eq!(eta_star.iter().filter(|&&v| v != 0.0).count(), 10);
        let eta_hat = Array2::<f64>::zeros((3, t_len));
        let freq = Array1::zeros(150);
        let m = support_metrics(&freq, &eta_hat, &eta_star, &thresholds(), 0.6);
        for tm in &m.per_threshold {
            assert_eq!(tm.tpr, Some(0.0));
            assert_eq!(tm.fpr, 0.0);
        }
        assert!((m.sign_tpr - 140.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn everything_selected() {
        let eta_star = array![[1.0, 0.0], [0.0, -1.0]];
        let eta_hat = array![[1.0, 0.5], [0.5, -1.0]];
        let freq = Array1::from(vec![1.0; 4]);
        let m = support_metrics(&freq, &eta_hat, &eta_star, &thresholds(), 0.6);
        for tm in &m.per_threshold {
            assert_eq!(tm.tpr, Some(1.0));
            assert_eq!(tm.fpr, 1.0);
        }
        assert_eq!(m.max_tpr_minus_fpr, Some(0.0));
    }

    #[test]
    fn missing_tpr_when_no_true_nonnull() {
        let eta_star = Array2::<f64>::zeros((1, 3));
        let eta_hat = array![[0.5, 0.0, 0.0]];
        let freq = Array1::from(vec![1.0, 0.0, 0.0]);
        let m = support_metrics(&freq, &eta_hat, &eta_star, &thresholds(), 0.6);
        assert!(m.per_threshold.iter().all(|tm| tm.tpr.is_none()));
        assert_eq!(m.max_tpr_minus_fpr, None);
    }

    #[test]
    fn sign_mismatch_is_not_credited() {
        // Selected with the wrong sign: not a sign match even though the
        // support is right.
        let eta_star = array![[1.0, -1.0]];
        let eta_hat = array![[-0.5, -0.9]];
        let freq = Array1::from(vec![1.0, 1.0]);
        let m = support_metrics(&freq, &eta_hat, &eta_star, &thresholds(), 0.6);
        assert_eq!(m.sign_tpr, 0.5);
    }
}
