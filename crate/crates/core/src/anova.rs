//! Poisson one-way ANOVA screen for wide panels.
//!
//! For each series position a Poisson GLM with a condition factor is tested
//! against the constant-mean null. The default statistic is the likelihood
//! ratio (deviance difference), chi-square with `I - 1` degrees of freedom
//! under the null; a per-coefficient Wald variant is available for
//! sensitivity analysis. Positions are kept when `p < 1/T` (or a fixed
//! alpha).

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{GlarmaError, Result};
use crate::panel::PanelData;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    /// Keep positions with `p < 1/T`.
    OneOverT,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterStatistic {
    /// Deviance-based likelihood-ratio test (default).
    LikelihoodRatio,
    /// Smallest per-contrast Wald p-value against the first condition.
    WaldPerCoefficient,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    /// One p-value per series position.
    pub p_values: Vec<f64>,
    /// Kept positions, ascending.
    pub kept: Vec<usize>,
    /// The significance threshold that was applied.
    pub threshold: f64,
}

/// Screens every series position. Needs at least two conditions.
pub fn anova_filter(
    data: &PanelData,
    rule: AlphaRule,
    statistic: FilterStatistic,
) -> Result<FilterOutcome> {
    let n_cond = data.n_conditions();
    if n_cond < 2 {
        return Err(GlarmaError::InvalidData(
            "the ANOVA screen needs at least two conditions".into(),
        ));
    }
    let t_len = data.series_len();
    let df = (n_cond - 1) as f64;
    let chi2 = ChiSquared::new(df).expect("positive degrees of freedom");
    let chi2_1 = ChiSquared::new(1.0).expect("one degree of freedom");

    let p_values: Vec<f64> = (0..t_len)
        .map(|t| match statistic {
            FilterStatistic::LikelihoodRatio => {
                let stat = lr_statistic(data, t);
                if stat <= 0.0 {
                    1.0
                } else {
                    1.0 - chi2.cdf(stat)
                }
            }
            FilterStatistic::WaldPerCoefficient => wald_min_p(data, t, &chi2_1),
        })
        .collect();

    let threshold = match rule {
        AlphaRule::OneOverT => 1.0 / t_len as f64,
        AlphaRule::Fixed(a) => {
            if !(a > 0.0 && a <= 1.0) {
                return Err(GlarmaError::InvalidConfig(format!(
                    "fixed alpha must lie in (0, 1], got {a}"
                )));
            }
            a
        }
    };
    let kept = apply_alpha_rule(&p_values, threshold);

    Ok(FilterOutcome {
        p_values,
        kept,
        threshold,
    })
}

/// Strict `p < threshold` selection.
pub fn apply_alpha_rule(p_values: &[f64], threshold: f64) -> Vec<usize> {
    p_values
        .iter()
        .enumerate()
        .filter(|(_, &p)| p < threshold)
        .map(|(t, _)| t)
        .collect()
}

/// Deviance difference between the per-condition-mean model and the
/// grand-mean model at position `t`. Terms with a zero fitted mean have all
/// observations zero and contribute nothing.
fn lr_statistic(data: &PanelData, t: usize) -> f64 {
    let mut grand_sum = 0.0;
    let mut grand_n = 0.0;
    let mut ll_alt = 0.0;
    for i in 0..data.n_conditions() {
        let col = data.condition(i).column(t);
        let n = col.len() as f64;
        let sum: f64 = col.sum();
        grand_sum += sum;
        grand_n += n;
        let mean = sum / n;
        if mean > 0.0 {
            ll_alt += sum * mean.ln() - sum;
        }
    }
    let grand_mean = grand_sum / grand_n;
    let ll_null = if grand_mean > 0.0 {
        grand_sum * grand_mean.ln() - grand_sum
    } else {
        0.0
    };
    (2.0 * (ll_alt - ll_null)).max(0.0)
}

/// Smallest Wald p-value over the `I - 1` log-mean contrasts against the
/// first condition, with half-count correction for empty cells.
fn wald_min_p(data: &PanelData, t: usize, chi2_1: &ChiSquared) -> f64 {
    let corrected = |i: usize| -> (f64, f64) {
        let col = data.condition(i).column(t);
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let m = if mean > 0.0 { mean } else { 1.0 / (2.0 * n) };
        (m, n)
    };
    let all_zero = (0..data.n_conditions())
        .all(|i| data.condition(i).column(t).iter().all(|&y| y == 0.0));
    if all_zero {
        return 1.0;
    }
    let (m0, n0) = corrected(0);
    let mut min_p = 1.0f64;
    for i in 1..data.n_conditions() {
        let (mi, ni) = corrected(i);
        let contrast = mi.ln() - m0.ln();
        let var = 1.0 / (ni * mi) + 1.0 / (n0 * m0);
        let z2 = contrast * contrast / var;
        let p = if z2 <= 0.0 { 1.0 } else { 1.0 - chi2_1.cdf(z2) };
        min_p = min_p.min(p);
    }
    min_p
}
