use thiserror::Error;

/// Errors raised by models, the particle filter and the estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric failure at step {step}: {detail}")]
    Numeric { step: usize, detail: String },

    #[error("invalid resampling weight {value} at index {index}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("test function returned a non-finite value ({value}) for terminal particle {index}")]
    NonFiniteTestFunction { index: usize, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("enumeration needs up to {paths:.0} paths, above the limit of {limit}")]
    EnumerationTooLarge { paths: f64, limit: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
