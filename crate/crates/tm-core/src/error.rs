//! One error type for the whole crate, with the CLI exit-code mapping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration, bad argument, unknown name, missing file.
    #[error("config error: {0}")]
    Config(String),
    /// Shape or dimension mismatch between states/tensors.
    #[error("shape error: {0}")]
    Shape(String),
    /// Index or domain argument outside its valid range.
    #[error("range error: {0}")]
    Range(String),
    /// Non-finite value produced during numerics; carries the offending site.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Monte-Carlo estimate unusable (effective sample size too small).
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// A property suite assertion failed.
    #[error("verification failure: {0}")]
    Verification(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI contract: 0 ok, 2 config error, 3 numeric error, 4 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Range(_) | Error::Io(_) => 2,
            Error::Numeric(_) | Error::InsufficientData(_) => 3,
            Error::Verification(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
