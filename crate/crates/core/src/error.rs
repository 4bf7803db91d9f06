use thiserror::Error;

/// Errors raised across the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("window too small: erosion by {radius} empties {window}")]
    DomainTooSmall { window: String, radius: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("sampler failure at step {step}: {reason}")]
    SamplerFailure { step: u64, reason: String },

    #[error("invalid quadrature resolution: {0}")]
    InvalidResolution(String),

    /// No empty space in the eroded window, so the ratio estimator is undefined.
    #[error("degenerate estimate: N = {n_isolated}, V = {empty_volume}")]
    DegenerateEstimate { n_isolated: u64, empty_volume: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse { context: context.into(), message: message.to_string() }
    }
}
