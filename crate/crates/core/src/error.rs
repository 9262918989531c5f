use thiserror::Error;

/// Errors raised by the library. Messages name the offending quantity.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("envelope not integrable on [{a}, {b}]: {detail}")]
    NotIntegrable { a: f64, b: f64, detail: String },
    #[error("singular step matrix at t = {t}")]
    Singular { t: f64 },
    #[error("fixed-point iteration failed on [{a}, {b}]: {detail}")]
    Contraction { a: f64, b: f64, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}

pub(crate) fn parameter<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
