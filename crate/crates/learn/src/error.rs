use ltv_core::LtvError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Core(#[from] LtvError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("a query was made at t={t} but no estimate was supplied")]
    MissingEstimate { t: usize },

    #[error("non-finite {what} at t={t}")]
    NonFinite { t: usize, what: &'static str },

    #[error("cover would hold {size} points, above the cap of {cap}; increase the resolution")]
    CoverTooLarge { size: f64, cap: usize },
}

impl LearnError {
    pub fn is_numerical(&self) -> bool {
        match self {
            LearnError::Core(e) => e.is_numerical(),
            LearnError::NonFinite { .. } => true,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, LearnError>;
