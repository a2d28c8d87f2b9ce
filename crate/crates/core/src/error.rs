use strokeseg_autograd::AutogradError;
use strokeseg_volume::VolumeError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Autograd(#[from] AutogradError),

    #[error(transparent)]
    Volume(#[from] VolumeError),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parameter sets differ: {0}")]
    KeyMismatch(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("{0} out of range")]
    OutOfRange(String),

    #[error("case {0} has no label")]
    MissingLabel(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
