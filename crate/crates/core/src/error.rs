use shotwright_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShotError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("attribute `{attribute}` has {classes} classes, got class index {value}")]
    AttributeOutOfRange {
        attribute: String,
        value: usize,
        classes: usize,
    },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} predictions vs {right} ground truths")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("config: {0}")]
    Config(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Nn(#[from] NnError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ShotError>;
