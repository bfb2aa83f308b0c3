use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inputs that do not fit together (grid mismatch, wrong lengths).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An argument outside the admissible range of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    /// The density is infinite at the requested point; integrate it as a cell mass instead.
    #[error("infinite density at u = {0}")]
    InfiniteDensity(f64),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("perturbation too small: distance fell below {threshold:e} after {samples} samples")]
    PerturbationTooSmall { threshold: f64, samples: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
