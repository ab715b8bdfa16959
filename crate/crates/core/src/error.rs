use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("exponent out of range: {0}")]
    InvalidExponent(String),
    #[error("cube not contained in the grid: {0}")]
    OutOfBounds(String),
    #[error("function not supported where required: {0}")]
    SupportViolation(String),
    #[error("scale does not fit the grid: {0}")]
    GridTooSmall(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("problem too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("not enough data points: {0}")]
    NotEnoughPoints(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
