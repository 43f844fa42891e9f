use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("integrand is not finite at node {index}")]
    NonFinite { index: usize },
    #[error("unbounded body: {0}")]
    Unbounded(String),
    #[error("degenerate function: {0}")]
    Degenerate(String),
    #[error("function has neither decay metadata nor compact support")]
    MissingDecay,
    #[error("function cannot be normalized: {0}")]
    NotNormalizable(String),
    #[error("operation not available for this input: {0}")]
    Unsupported(String),
    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
