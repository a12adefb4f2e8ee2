use thiserror::Error;

/// Unified error type for every fallible operation in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes incompatible with the requested operation. The message
    /// names both shapes so the offending call site is identifiable.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// An argument outside the operation's domain (bad stride, empty input,
    /// out-of-range label, invalid hyperparameter, ...).
    #[error("invalid argument to {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },

    /// A NaN or infinity surfaced where finite values are required.
    #[error("non-finite {what} in `{name}`")]
    NonFinite { what: &'static str, name: String },

    /// Checkpoint file malformed or inconsistent with the target model.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Dataset layout or manifest problem.
    #[error("dataset error: {0}")]
    Data(String),

    /// Configuration file or field rejected.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument { op, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
