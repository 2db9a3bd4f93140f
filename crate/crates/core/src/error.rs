use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cell ({row}, {col}) holds more than {capacity} paths")]
    CellCapacity { row: usize, col: usize, capacity: usize },

    #[error("path generation failed after {attempts} rejected draws")]
    GenerationFailure { attempts: usize },

    #[error("degenerate system: paths {first} and {second} are not separable")]
    Degenerate { first: usize, second: usize },

    #[error("SNR is undefined for zero noise variance")]
    UndefinedSnr,

    #[error("dataset format error in field `{field}`: {reason}")]
    Format { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
