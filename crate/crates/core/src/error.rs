use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("under-resolved grid: {0}")]
    Resolution(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("kernel evaluated at the origin")]
    SingularPoint,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
