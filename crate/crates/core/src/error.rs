use thiserror::Error;

/// Errors surfaced by the fitting, selection and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A threshold fell outside the region where the requested bound is defined.
    #[error("threshold {tau} outside the valid region ({lo}, {hi}] of the {method} bound")]
    BoundRegion {
        method: &'static str,
        tau: f64,
        lo: f64,
        hi: f64,
    },

    #[error("tuning failed: {0}")]
    TuningFailed(String),

    /// Simulated draw produced an unusable dataset (for example a single class).
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True when the error reflects bad user input rather than a runtime failure.
    pub fn is_invalid_input(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::BoundRegion { .. })
    }
}
