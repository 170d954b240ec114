use thiserror::Error;

/// Errors raised by the laboratory. `Config` maps to exit code 2, the rest to 3.
#[derive(Debug, Error)]
pub enum RgError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("level mismatch: expected {expected}, got {got}")]
    LevelMismatch { expected: String, got: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular operator at momentum {momentum:?}: {detail}")]
    Singular { momentum: [f64; 4], detail: String },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("too many terminals for exact Steiner tree: {0} (cap is 6)")]
    TooManyTerminals(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl RgError {
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            RgError::Config(_) | RgError::LevelMismatch { .. } | RgError::ShapeMismatch(_)
        )
    }
}

pub type RgResult<T> = Result<T, RgError>;
