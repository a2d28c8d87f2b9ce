//! Dataset manifests: JSON listing each case's id, split, domain and image
//! paths relative to the manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strokeseg_volume::{load_mask, load_volume, save_volume, CaseRecord, Domain};

use crate::error::{Result, SynthError};
use crate::generate::{Split, SyntheticSplit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
    pub domain: Domain,
    pub dwi: String,
    pub adc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Registration matrix (native world to reference world) of a
    /// preprocessed case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<String>,
    /// Any image on the case's native grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub cases: Vec<ManifestEntry>,
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.to_path_buf(), source }
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        serde_json::from_str(&text).map_err(|e| SynthError::Manifest { path: path.into(), reason: e.to_string() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        std::fs::write(path, text).map_err(io(path))
    }

    pub fn entries(&self, split: Option<Split>) -> impl Iterator<Item = &ManifestEntry> {
        self.cases.iter().filter(move |e| split.is_none_or(|s| e.split == s))
    }
}

/// Resolves a manifest path relative to the manifest's directory.
pub fn resolve(manifest: &Path, rel: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(rel)
}

/// Loads the cases of `split` (all when `None`) listed in the manifest at
/// `path`, in manifest order.
pub fn load_cases(path: impl AsRef<Path>, split: Option<Split>) -> Result<Vec<CaseRecord>> {
    let path = path.as_ref();
    let m = Manifest::load(path)?;
    m.entries(split).map(|e| load_entry(path, e)).collect()
}

/// Loads the images of one entry of the manifest at `manifest`.
pub fn load_entry(manifest: &Path, e: &ManifestEntry) -> Result<CaseRecord> {
    let label = e.label.as_ref().map(|l| load_mask(resolve(manifest, l))).transpose()?;
    Ok(CaseRecord::new(&e.id, load_volume(resolve(manifest, &e.dwi))?, load_volume(resolve(manifest, &e.adc))?, label, e.domain)?)
}

/// Writes one case's images under `dir/<sub>/` and returns its entry, with
/// paths relative to `dir`.
pub fn write_case(case: &CaseRecord, split: Split, dir: &Path, sub: &str) -> Result<ManifestEntry> {
    let folder = dir.join(sub);
    std::fs::create_dir_all(&folder).map_err(io(&folder))?;
    let rel = |kind: &str| format!("{sub}/{}_{kind}.nii.gz", case.id);
    save_volume(&case.dwi, dir.join(rel("dwi")))?;
    save_volume(&case.adc, dir.join(rel("adc")))?;
    let label = match &case.label {
        Some(l) => {
            save_volume(l, dir.join(rel("label")))?;
            Some(rel("label"))
        }
        None => None,
    };
    Ok(ManifestEntry { id: case.id.clone(), split, domain: case.domain, dwi: rel("dwi"), adc: rel("adc"), label, transform: None, native: None })
}

/// Writes every case of `data` plus `dir/manifest.json`.
pub fn write_split(data: &SyntheticSplit, dir: &Path) -> Result<Manifest> {
    let mut manifest = Manifest::default();
    for split in Split::ALL {
        for case in data.get(split) {
            manifest.cases.push(write_case(case, split, dir, split.name())?);
        }
    }
    manifest.save(dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

pub const MANIFEST_FILE: &str = "manifest.json";
