use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration document failed validation. `field` locates the
    /// offending entry in JSON-path style, e.g. `pumps[0].wavelength_nm`.
    #[error("invalid config at `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// A physical-domain precondition was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Timestamp data was not sorted in ascending order.
    #[error("stream `{channel}` is not time-ordered at index {index}")]
    UnsortedStream { channel: String, index: usize },

    /// An estimator could not be formed, e.g. zero singles rate.
    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),

    /// Recorded streams carry a different scenario hash than the scenario
    /// they are being analyzed against.
    #[error("scenario hash mismatch: stream carries {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },

    #[error("malformed data file `{path}`: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn malformed(path: impl AsRef<std::path::Path>, reason: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.as_ref().display().to_string(),
            reason: reason.into(),
        }
    }

    /// Process exit code class: 2 for validation/input errors, 1 for runtime
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig { .. }
            | Error::Domain(_)
            | Error::UnsortedStream { .. }
            | Error::HashMismatch { .. }
            | Error::MalformedFile { .. }
            | Error::Json(_) => 2,
            Error::UndefinedEstimate(_) | Error::Io(_) => 1,
        }
    }
}
