use ndarray::{Array1, Array2};

use crate::error::{GlarmaError, Result};
use crate::panel::PanelData;

/// Model parameters: the `I x T` regression coefficient matrix `eta` (log-mean
/// scale) and the length-`q` feedback coefficient vector `gamma`. `q = 0`
/// reduces the model to an ordinary Poisson GLM.
#[derive(Debug, Clone, PartialEq)]
pub struct GlarmaParams {
    eta: Array2<f64>,
    gamma: Array1<f64>,
}

impl GlarmaParams {
    pub fn new(eta: Array2<f64>, gamma: Array1<f64>) -> Result<Self> {
        if let Some(bad) = eta.iter().find(|v| !v.is_finite()) {
            return Err(GlarmaError::InvalidData(format!("non-finite eta entry {bad}")));
        }
        if let Some(bad) = gamma.iter().find(|v| !v.is_finite()) {
            return Err(GlarmaError::InvalidData(format!(
                "non-finite gamma entry {bad}"
            )));
        }
        Ok(Self { eta, gamma })
    }

    /// Checks that the shapes match a panel: `eta` must be `I x T`.
    pub fn check_shape(&self, data: &PanelData) -> Result<()> {
        if self.eta.nrows() != data.n_conditions() || self.eta.ncols() != data.series_len() {
            return Err(GlarmaError::DimensionMismatch(format!(
                "eta is {}x{}, panel needs {}x{}",
                self.eta.nrows(),
                self.eta.ncols(),
                data.n_conditions(),
                data.series_len()
            )));
        }
        Ok(())
    }

    pub fn eta(&self) -> &Array2<f64> {
        &self.eta
    }

    pub fn gamma(&self) -> &Array1<f64> {
        &self.gamma
    }

    /// Feedback lag order `q`.
    pub fn q(&self) -> usize {
        self.gamma.len()
    }
}
