use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Malformed operator or projection description; `field` is a path into the document.
    #[error("invalid field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("index sort mismatch: expected {expected}, got {found}")]
    SortMismatch { expected: String, found: String },

    #[error("zero projection where a non-zero finite rank projection is required")]
    ZeroProjection,

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A certified analytic bound was not respected by the measured value.
    #[error("certified bound violated at step {step}: measured {measured} > bound {bound}")]
    CertificateViolation {
        step: usize,
        measured: f64,
        bound: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
