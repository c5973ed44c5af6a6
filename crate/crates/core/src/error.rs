use thiserror::Error;

/// Every fallible operation in the crate returns this.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("truncation too small for {what}: per-mode dimension {required} needed, got {got}")]
    Truncation {
        what: String,
        required: usize,
        got: usize,
    },

    #[error("hopping phase undefined for pair ({k}, {j}): drive phases coincide")]
    UndefinedPhase { k: usize, j: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integration failure at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the caller's configuration rather than numerics or IO.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Argument(_)
                | Error::Dimension(_)
                | Error::Truncation { .. }
                | Error::UndefinedPhase { .. }
                | Error::Unsupported(_)
                | Error::Config { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
