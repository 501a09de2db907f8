use std::path::PathBuf;

use ltv_core::LtvError;
use ltv_instances::InstanceError;
use ltv_learn::LearnError;
use thiserror::Error;

/// Process exit status for validation failures (bad input, failed audits).
pub const EXIT_VALIDATION: i32 = 2;
/// Process exit status for numerical failures (divergence, non-finite values).
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Core(#[from] LtvError),

    #[error(transparent)]
    Learn(#[from] LearnError),

    #[error(transparent)]
    Instance(#[from] InstanceError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("grid search needs {points:.3e} evaluations (cap {cap}); use a coarser pitch or projected descent")]
    GridTooLarge { points: f64, cap: usize },
}

impl HarnessError {
    pub fn is_numerical(&self) -> bool {
        match self {
            HarnessError::Numerical(_) => true,
            HarnessError::Core(e) => e.is_numerical(),
            HarnessError::Learn(e) => e.is_numerical(),
            HarnessError::Instance(e) => e.is_numerical(),
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            EXIT_NUMERICAL
        } else {
            EXIT_VALIDATION
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
