use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{what} is outside the domain: {detail}")]
    Domain { what: &'static str, detail: String },

    /// Adaptive quadrature exhausted its budget before reaching the tolerance.
    /// The best estimate is carried along so callers may still use it.
    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Accuracy { estimate: f64, error: f64 },

    /// The requested case is valid mathematically but not computed by this library.
    #[error("unsupported case: {0}")]
    Unsupported(String),

    /// Malformed configuration or input data.
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
