use thiserror::Error;

/// Errors raised by the numerical kernels, trainers and data loaders.
#[derive(Debug, Error)]
pub enum NimoError {
    #[error("column {0} has zero variance")]
    ConstantColumn(usize),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite after jitter escalation")]
    NotSpd,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("forward cache does not match the upstream gradient shape")]
    StaleCache,

    #[error("training diverged at iteration {iteration}: loss is not finite")]
    Diverged { iteration: usize },

    #[error("solver did not converge within {0} iterations")]
    MaxIterations(usize),

    #[error("unknown setting `{0}`")]
    UnknownSetting(String),

    #[error("not enough rows: need {needed}, have {available}")]
    InsufficientRows { needed: usize, available: usize },

    #[error("cannot parse value at row {row}, column {col}")]
    Parse { row: usize, col: usize },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, NimoError>;

pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> NimoError {
    NimoError::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
