use ltv_core::LtvError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Core(#[from] LtvError),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("DIMACS line {line}: {reason}")]
    Dimacs { line: usize, reason: String },

    #[error("clause {clause}: {reason}")]
    Clause { clause: usize, reason: String },

    /// A gain column is too far from the 2-simplex for rounding to be meaningful;
    /// the regularity penalty must be scaled up until such columns are unprofitable.
    #[error("column {column} lies {distance:.3e} from the simplex (tolerance {tolerance:.3e}); raise the regularity scale so that off-simplex gains cost more than they gain")]
    OffSimplex { column: usize, distance: f64, tolerance: f64 },

    #[error("brute force over {n} variables exceeds the cap of {cap}")]
    TooManyVariables { n: usize, cap: usize },
}

impl InstanceError {
    /// Numerical (as opposed to validation) failures.
    pub fn is_numerical(&self) -> bool {
        matches!(self, InstanceError::Core(e) if e.is_numerical())
    }
}

pub type Result<T, E = InstanceError> = std::result::Result<T, E>;
