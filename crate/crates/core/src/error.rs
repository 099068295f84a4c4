use thiserror::Error;

/// Errors produced anywhere in the operator stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("element kind error: {0}")]
    Kind(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(
        "mode constraint violated on spatial dim {dim}: size {size} is smaller than 2 x {modes} retained modes"
    )]
    ModeViolation { dim: usize, size: usize, modes: usize },
    #[error("tape error: {0}")]
    Tape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(format!($($arg)*)) };
}
macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::Invalid(format!($($arg)*)) };
}
pub(crate) use invalid;
pub(crate) use shape_err;
