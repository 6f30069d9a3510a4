use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("solver stopped after {iterations} iterations at relative residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("incompatible right-hand side: {0}")]
    IncompatibleRhs(String),
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("unsupported file header: {0}")]
    Header(String),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("{failed} of {total} samples failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
