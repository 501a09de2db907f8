use thiserror::Error;

/// Errors raised by the core LTV routines.
#[derive(Debug, Error)]
pub enum LtvError {
    #[error("dimension mismatch at t={t}: {what} expected {expected}, found {found}")]
    Dimension {
        t: usize,
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("insufficient history: requested {requested} steps back at t={t}")]
    InsufficientHistory { t: usize, requested: usize },

    #[error("step {t} outside horizon 1..={horizon}")]
    OutOfHorizon { t: usize, horizon: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty interval")]
    EmptyInterval,

    #[error("state diverged at t={t} (norm {norm:e})")]
    Divergence { t: usize, norm: f64 },

    #[error("non-finite value in {what} at t={t}")]
    NonFinite { t: usize, what: &'static str },

    #[error("invalid instance document: {0}")]
    Document(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LtvError {
    /// True for failures caused by floating-point blow-up rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, LtvError::Divergence { .. } | LtvError::NonFinite { .. })
    }
}

pub type Result<T> = std::result::Result<T, LtvError>;

pub(crate) fn dim_err(t: usize, what: &'static str, expected: (usize, usize), found: (usize, usize)) -> LtvError {
    LtvError::Dimension {
        t,
        what,
        expected: format!("{}x{}", expected.0, expected.1),
        found: format!("{}x{}", found.0, found.1),
    }
}
