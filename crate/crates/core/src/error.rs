use thiserror::Error;

/// Errors raised by the library. Failing numerical checks are reported as data, not errors;
/// these variants cover malformed input and computations that cannot proceed.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {index} outside {what}")]
    IndexOutOfRange { index: usize, what: String },
    #[error("trajectory endpoint missing: {0}")]
    MissingEndpoint(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{what} is numerically singular (condition number {cond:.3e})")]
    Singular { what: String, cond: f64 },
    #[error("recursion residual {residual:.3e} exceeds {limit:.1e}: {context}")]
    RecursionResidual {
        residual: f64,
        limit: f64,
        context: String,
    },
    #[error("unbounded interval requires an explicit truncation index")]
    TruncationRequired,
    #[error("not certified: {0}")]
    NotCertified(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
