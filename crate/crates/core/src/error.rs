use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or settings that do not agree with each other.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input values outside their documented domain.
    #[error("input error: {0}")]
    Input(String),

    /// A computation produced a non-finite value or failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Broken internal contract, e.g. a tape op without a backward rule.
    #[error("internal error: {0}")]
    Internal(String),

    /// The training loss became non-finite.
    #[error("non-finite loss at step {step} (last good step: {})", last_good.map(|s| s.to_string()).unwrap_or_else(|| "none".into()))]
    NonFiniteLoss { step: u64, last_good: Option<u64> },

    #[error("format error: {0}")]
    Format(String),

    /// A stored artefact was written by an incompatible schema or model.
    #[error("version error: {0}")]
    Version(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
