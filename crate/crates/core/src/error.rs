use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("composition error: {0}")]
    Composition(String),
    #[error("pairing error: {0}")]
    Pairing(String),
    #[error("conditioning error: {0}")]
    Conditioning(String),
}

impl Error {
    /// True for errors produced by numerical guards (conditioning, coverage)
    /// rather than by invalid input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(self, Error::Conditioning(_) | Error::Coverage(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
