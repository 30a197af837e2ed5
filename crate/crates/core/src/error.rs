use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series of length {len} is too short: {reason}")]
    TooShort { len: usize, reason: String },

    #[error("label at row {row} is {value}, expected 0 or 1")]
    NonBinaryLabel { row: usize, value: String },

    #[error("bandwidth rule failed: {0}; set the bandwidth manually")]
    Bandwidth(String),

    #[error("empty index set: {0}")]
    EmptySet(&'static str),

    #[error("no evaluation points within distance {epsilon} of {center}")]
    EmptyBall { center: f64, epsilon: f64 },

    #[error("irregular time spacing at row {row}: expected step {expected}, found {found}")]
    IrregularSpacing { row: usize, expected: f64, found: f64 },

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
