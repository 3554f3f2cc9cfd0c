use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("planning failed: {0}")]
    Planning(String),

    #[error("training failed: {0}")]
    Training(String),

    /// The zero-shot episode in the target environment crashed, so the
    /// base is not safe enough to collect adaptation data.
    #[error("scenario failure: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
