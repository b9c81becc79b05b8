use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown channel {0}")]
    UnknownChannel(u64),

    #[error("unauthorized")]
    Unauthorized,

    #[error("authentication failed")]
    AuthenticationFailed,

    #[error("corrupt storage in {file}: {message}")]
    Corrupt { file: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
