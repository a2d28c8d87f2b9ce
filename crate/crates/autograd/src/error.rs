use thiserror::Error;

pub type Result<T> = std::result::Result<T, AutogradError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutogradError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("unknown parameter {0}")]
    UnknownParam(String),

    #[error("non-finite activation produced by layer {0}")]
    NonFinite(String),
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> AutogradError {
    AutogradError::Shape { op, detail: detail.into() }
}
