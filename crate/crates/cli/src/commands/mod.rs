pub mod evaluate;
pub mod infer;
pub mod preprocess;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use strokeseg_synth::MANIFEST_FILE;

use crate::error::{io, Result};

/// A manifest path, or a directory taken to hold `manifest.json`.
pub fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_FILE)
    } else {
        p.to_path_buf()
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(io(path))
}
