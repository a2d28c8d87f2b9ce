//! External tools driven through a file-based process contract:
//! `<tool> <in.nii.gz> <out.nii.gz> [<matrix.txt>]`.

use std::path::Path;
use std::process::Command;

use crate::error::{PreprocessError, Result};

/// Environment variable carrying the reference image path to registration
/// tools.
pub const REFERENCE_ENV: &str = "STROKESEG_REFERENCE";

/// A command line (program plus fixed leading arguments) that receives the
/// contract arguments after its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adapter {
    program: String,
    leading: Vec<String>,
}

impl Adapter {
    pub fn new(program: impl Into<String>) -> Self {
        Self { program: program.into(), leading: Vec::new() }
    }

    /// Splits `line` on whitespace: the first word is the program.
    pub fn parse(line: &str) -> Option<Self> {
        let mut words = line.split_whitespace().map(str::to_string);
        let program = words.next()?;
        Some(Self { program, leading: words.collect() })
    }

    pub fn with_args(mut self, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.leading.extend(args.into_iter().map(Into::into));
        self
    }

    pub fn describe(&self) -> String {
        std::iter::once(self.program.as_str()).chain(self.leading.iter().map(String::as_str)).collect::<Vec<_>>().join(" ")
    }

    /// Runs the tool to completion. Stdout is discarded; stderr is returned
    /// in the error on a nonzero exit.
    pub fn run(&self, files: &[&Path], env: &[(&str, &Path)]) -> Result<()> {
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.leading).args(files);
        for (k, v) in env {
            cmd.env(k, v);
        }
        let out = cmd.output().map_err(|source| PreprocessError::AdapterMissing { tool: self.describe(), source })?;
        if !out.status.success() {
            return Err(PreprocessError::AdapterFailure {
                tool: self.describe(),
                status: out.status.to_string(),
                stderr: String::from_utf8_lossy(&out.stderr).trim_end().to_string(),
            });
        }
        Ok(())
    }
}
