use ndarray::Array2;

use crate::error::{GlarmaError, Result};

/// Observed count panel: one `(n_i, T)` matrix of counts per condition.
///
/// The panel is dense within each condition; the number of replicates may
/// differ across conditions. Counts are stored as `f64` and validated to be
/// finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    counts: Vec<Array2<f64>>,
    series_len: usize,
}

impl PanelData {
    /// Builds a panel from per-condition count matrices, each `(n_i, T)`.
    pub fn new(counts: Vec<Array2<f64>>) -> Result<Self> {
        if counts.is_empty() {
            return Err(GlarmaError::InvalidData("panel has no conditions".into()));
        }
        let series_len = counts[0].ncols();
        if series_len == 0 {
            return Err(GlarmaError::InvalidData("panel has zero series length".into()));
        }
        for (i, block) in counts.iter().enumerate() {
            if block.ncols() != series_len {
                return Err(GlarmaError::DimensionMismatch(format!(
                    "condition {i} has {} series positions, expected {series_len}",
                    block.ncols()
                )));
            }
            if block.nrows() == 0 {
                return Err(GlarmaError::InvalidData(format!(
                    "condition {i} has no replicates"
                )));
            }
            for ((j, t), &y) in block.indexed_iter() {
                if !y.is_finite() || y < 0.0 {
                    return Err(GlarmaError::InvalidData(format!(
                        "count at condition {i}, replicate {j}, position {t} is {y}"
                    )));
                }
            }
        }
        Ok(Self { counts, series_len })
    }

    pub fn n_conditions(&self) -> usize {
        self.counts.len()
    }

    /// Number of replicates in condition `i`.
    pub fn n_reps(&self, i: usize) -> usize {
        self.counts[i].nrows()
    }

    pub fn rep_counts(&self) -> Vec<usize> {
        self.counts.iter().map(|b| b.nrows()).collect()
    }

    /// Series length `T` (shared across conditions).
    pub fn series_len(&self) -> usize {
        self.series_len
    }

    /// Count matrix `(n_i, T)` for condition `i`.
    pub fn condition(&self, i: usize) -> &Array2<f64> {
        &self.counts[i]
    }

    /// Total number of observed cells.
    pub fn n_cells(&self) -> usize {
        self.counts.iter().map(|b| b.len()).sum()
    }

    /// Number of regression coefficients, `I * T`.
    pub fn n_coeffs(&self) -> usize {
        self.n_conditions() * self.series_len
    }
}

/// Flat column index of coefficient `(i, t)` in the condition-major layout.
pub fn coeff_index(i: usize, t: usize, series_len: usize) -> usize {
    i * series_len + t
}

/// Inverse of [`coeff_index`].
pub fn coeff_position(index: usize, series_len: usize) -> (usize, usize) {
    (index / series_len, index % series_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn accepts_ragged_replicates() {
        let panel = PanelData::new(vec![
            array![[1.0, 2.0, 0.0]],
            array![[3.0, 0.0, 1.0], [2.0, 2.0, 2.0]],
        ])
        .unwrap();
        assert_eq!(panel.n_conditions(), 2);
        assert_eq!(panel.rep_counts(), vec![1, 2]);
        assert_eq!(panel.series_len(), 3);
        assert_eq!(panel.n_cells(), 9);
    }

    #[test]
    fn rejects_negative_and_non_finite() {
        assert!(PanelData::new(vec![array![[1.0, -2.0]]]).is_err());
        assert!(PanelData::new(vec![array![[1.0, f64::NAN]]]).is_err());
        assert!(PanelData::new(vec![array![[1.0, f64::INFINITY]]]).is_err());
    }

    #[test]
    fn rejects_mismatched_series_length() {
        let err = PanelData::new(vec![array![[1.0, 2.0]], array![[1.0, 2.0, 3.0]]]);
        assert!(err.is_err());
    }

    #[test]
    fn coeff_index_roundtrip() {
        let t_len = 7;
        for i in 0..3 {
            for t in 0..t_len {
                let col = coeff_index(i, t, t_len);
                assert_eq!(coeff_position(col, t_len), (i, t));
            }
        }
    }
}
