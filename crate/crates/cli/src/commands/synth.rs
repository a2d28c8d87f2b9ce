use std::path::Path;

use strokeseg_synth::{generate_split, write_split, PhantomSpec};

use super::create_dir;
use crate::error::{io, CliError, Result};

pub fn run(spec: Option<&Path>, out: &Path, seed: u64, [n_src, n_tgt, n_test]: [usize; 3]) -> Result<()> {
    let spec = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io(p))?;
            toml::from_str::<PhantomSpec>(&text).map_err(|e| CliError::Parse { path: p.into(), reason: e.to_string() })?
        }
        None => PhantomSpec::default(),
    };
    let data = generate_split(&spec, n_src, n_tgt, n_test, seed)?;
    create_dir(out)?;
    let manifest = write_split(&data, out)?;
    println!("wrote {} cases to {}", manifest.cases.len(), out.display());
    Ok(())
}
