use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("class {class} has {available} instances, {needed} required")]
    InsufficientInstances {
        class: usize,
        needed: usize,
        available: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch} (last good epoch: {})", fmt_last_good(.last_good_epoch))]
    Diverged {
        epoch: usize,
        last_good_epoch: Option<usize>,
    },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_last_good(epoch: &Option<usize>) -> String {
    match epoch {
        Some(e) => e.to_string(),
        None => "none".to_string(),
    }
}

impl Error {
    pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }
}
