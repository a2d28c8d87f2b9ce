use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] strokeseg_core::CoreError),
    #[error(transparent)]
    Eval(#[from] strokeseg_evaluate::EvalError),
    #[error(transparent)]
    Preprocess(#[from] strokeseg_preprocess::PreprocessError),
    #[error(transparent)]
    Synth(#[from] strokeseg_synth::SynthError),
    #[error(transparent)]
    Volume(#[from] strokeseg_volume::VolumeError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn io(path: &std::path::Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}
