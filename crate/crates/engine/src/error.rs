use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] ddsp_sfx_core::Error),
    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },
    #[error("wav error: {0}")]
    Wav(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("request error: {0}")]
    Request(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::File {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True when the caller sent something unusable rather than the server failing.
    pub fn is_client_error(&self) -> bool {
        use ddsp_sfx_core::Error as C;
        matches!(
            self,
            Error::Wav(_)
                | Error::Request(_)
                | Error::Json(_)
                | Error::Core(C::Input(_) | C::Config(_) | C::Format(_))
        )
    }
}
