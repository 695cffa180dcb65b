use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was asked to handle a waveform class it does not cover.
    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),
    /// A caller violated a precondition (shape, range, normalization).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Training(String),
    /// Experiment or CLI configuration is missing or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// A binary file failed validation while being read.
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
