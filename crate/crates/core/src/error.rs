use thiserror::Error;

/// Errors surfaced by model evaluation, estimation and selection.
#[derive(Debug, Error)]
pub enum GlarmaError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("non-finite state W at condition {condition}, replicate {replicate}, position {position}")]
    NonFiniteState {
        condition: usize,
        replicate: usize,
        position: usize,
    },

    #[error("degenerate curvature: the negated coefficient Hessian has no positive eigenvalue")]
    DegenerateCurvature,

    #[error("stability selection needs at least 2 rows, got {0}")]
    TooFewRows(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, GlarmaError>;
