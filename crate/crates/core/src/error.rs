use thiserror::Error;

/// Errors raised anywhere in the training pipeline.
#[derive(Debug, Error)]
pub enum DpdaError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate gradient: {0}")]
    DegenerateGradient(&'static str),

    #[error("directions are nearly parallel; resample required")]
    ResampleRequired,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

impl DpdaError {
    /// True for failures caused by arithmetic blowing up during a run, as opposed
    /// to bad inputs or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(self, DpdaError::NonFinite(_) | DpdaError::DegenerateGradient(_) | DpdaError::ResampleRequired)
    }
}

pub type Result<T> = std::result::Result<T, DpdaError>;
