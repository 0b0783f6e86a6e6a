use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("pseudo-Hessian is singular (|det| = {det:e}); no unique Nash equilibrium")]
    SingularHessian { det: f64 },

    #[error("invalid market parameters: {0}")]
    InvalidMarket(String),

    #[error("invalid dither plan: {0}")]
    InvalidDither(String),

    #[error("invalid trigger policy: {0}")]
    InvalidPolicy(String),

    #[error("event time {t} is not after the last event at {last}")]
    NonMonotoneTime { t: f64, last: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("event log is empty")]
    EmptyLog,

    #[error("state magnitude exceeded {limit:e} at t = {t}")]
    NumericOverflow { t: f64, limit: f64 },

    #[error("K*H is not Hurwitz")]
    NotHurwitz,

    #[error("trajectory has not converged: {0}")]
    NotConverged(String),

    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("invalid scenario field `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
