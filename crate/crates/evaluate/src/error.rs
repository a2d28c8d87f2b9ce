use strokeseg_volume::VolumeError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Volume(#[from] VolumeError),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("ranking table is incomplete: {0}")]
    MissingCell(String),

    #[error("duplicate record for case {case_id:?}, model {model_id:?}")]
    Duplicate { case_id: String, model_id: String },

    #[error("non-finite {metric} for case {case_id:?}, model {model_id:?}")]
    NonFinite { case_id: String, model_id: String, metric: &'static str },

    #[error("no ground-truth volume for case {0:?}")]
    MissingVolume(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
