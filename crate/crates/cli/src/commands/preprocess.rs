use std::path::{Path, PathBuf};

use strokeseg_preprocess::{blank_reference, map_mask_to_native, preprocess_case, write_result, Adapter, Tools};
use strokeseg_synth::{load_entry, Manifest, ManifestEntry, MANIFEST_FILE};
use strokeseg_volume::{load_volume, save_volume, Volume};

use super::{create_dir, manifest_path};
use crate::error::{CliError, Result};
use crate::jobs::par_map;

pub struct Options {
    pub input: PathBuf,
    pub out: PathBuf,
    pub reference: Option<PathBuf>,
    pub skullstrip_tool: String,
    pub register_tool: String,
    pub jobs: usize,
}

fn adapter(cmd: &str, what: &str) -> Result<Adapter> {
    Adapter::parse(cmd).ok_or_else(|| CliError::Invalid(format!("empty {what} command")))
}

fn one(manifest: &Path, e: &ManifestEntry, reference: &Volume, tools: &Tools, out: &Path) -> Result<ManifestEntry> {
    let case = load_entry(manifest, e)?;
    let result = preprocess_case(&case, reference, tools)?;
    let cases = out.join("cases");
    write_result(&result, &e.id, &cases)?;
    let native = map_mask_to_native(&result.brain_mask, &result.transform, &result.native_grid);
    let rel = |kind: &str, ext: &str| format!("cases/{}_{kind}.{ext}", e.id);
    save_volume(&native, out.join(rel("brain_native", "nii.gz")))?;
    Ok(ManifestEntry {
        id: e.id.clone(),
        split: e.split,
        domain: e.domain,
        dwi: rel("dwi", "nii.gz"),
        adc: rel("adc", "nii.gz"),
        label: result.label.as_ref().map(|_| rel("label", "nii.gz")),
        transform: Some(rel("transform", "txt")),
        native: Some(rel("brain_native", "nii.gz")),
    })
}

pub fn run(opts: &Options) -> Result<()> {
    let manifest = manifest_path(&opts.input);
    let input = Manifest::load(&manifest)?;
    let first = input.cases.first().ok_or_else(|| CliError::Invalid(format!("{} lists no cases", manifest.display())))?;
    let tools = Tools { skull_strip: adapter(&opts.skullstrip_tool, "skull-strip")?, register: adapter(&opts.register_tool, "registration")? };
    let reference = match &opts.reference {
        Some(p) => load_volume(p)?,
        None => blank_reference(load_entry(&manifest, first)?.grid()),
    };
    create_dir(&opts.out.join("cases"))?;
    let entries = par_map(&input.cases, opts.jobs, |e| {
        one(&manifest, e, &reference, &tools, &opts.out).map_err(|err| CliError::Invalid(format!("case {}: {err}", e.id)))
    });
    let out = Manifest { cases: entries.into_iter().collect::<Result<_>>()? };
    out.save(opts.out.join(MANIFEST_FILE))?;
    println!("preprocessed {} cases into {}", out.cases.len(), opts.out.display());
    Ok(())
}
