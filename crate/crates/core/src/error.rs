use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value failed validation. `field` is a dotted path to the offending input.
    #[error("invalid input at `{field}`: {message}")]
    InvalidInput { field: String, message: String },

    #[error("{what} not found: {id}")]
    NotFound { what: &'static str, id: String },

    /// A malformed row in a CSV input. Line numbers are 1-based and count the header.
    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("integrity check failed for {key}: {message}")]
    Integrity { key: String, message: String },

    #[error("capacity exceeded: {message}")]
    Capacity { message: String },

    #[error("job {id} is not finished (status {status})")]
    NotReady { id: String, status: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn not_found(what: &'static str, id: impl Into<String>) -> Self {
        Error::NotFound { what, id: id.into() }
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidInput { .. } | Error::Parse { .. })
    }
}
