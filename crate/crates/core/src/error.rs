use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands disagree along a named axis.
    #[error("{op}: dimension mismatch on axis `{axis}` (expected {expected}, found {found})")]
    Dimension {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        found: usize,
    },

    /// A precondition of an operation was violated.
    #[error("{0}")]
    Contract(String),

    /// Malformed container, checkpoint or manifest.
    #[error("format error: {0}")]
    Format(String),

    /// Well-formed data whose content violates an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Input for which a metric is undefined (zero band mean, all windows flat, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A loss term evaluated to NaN or infinity during training.
    #[error("non-finite `{term}` loss at iteration {iteration}")]
    NonFinite { term: String, iteration: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn dim(op: &'static str, axis: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            op,
            axis,
            expected,
            found,
        }
    }
}
