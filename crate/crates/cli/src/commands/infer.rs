use std::path::{Path, PathBuf};

use strokeseg_core::checkpoint::load_checkpoint;
use strokeseg_core::ensemble::{build_ensemble_n, ensemble_predict, Member};
use strokeseg_core::training::infer;
use strokeseg_core::NetworkWeights;
use strokeseg_preprocess::{map_mask_to_native, RigidTransform};
use strokeseg_synth::{load_entry, resolve, Manifest, ManifestEntry, Split};
use strokeseg_volume::{load_volume, save_volume};

use super::{create_dir, manifest_path};
use crate::error::{io, CliError, Result};
use crate::jobs::par_map;
use crate::InferCommon;

pub enum Models {
    Single(PathBuf),
    Ensemble { spec: PathBuf, top: Option<usize> },
}

pub struct Options {
    pub data: PathBuf,
    pub out: PathBuf,
    pub split: Option<Split>,
    pub native: bool,
    pub jobs: usize,
}

impl From<InferCommon> for Options {
    fn from(a: InferCommon) -> Self {
        Self { data: a.data, out: a.out, split: a.split.map(Into::into), native: a.native, jobs: a.jobs }
    }
}

/// Checkpoint paths listed in an ensemble spec, resolved against the spec's
/// directory.
pub fn read_ensemble_spec(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let listed: Vec<String> = serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.into(), reason: e.to_string() })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    Ok(listed.into_iter().map(|p| (p.clone(), dir.join(p))).collect())
}

fn load_models(models: &Models) -> Result<Vec<(String, NetworkWeights)>> {
    let listed = match models {
        Models::Single(p) => vec![(p.display().to_string(), p.clone())],
        Models::Ensemble { spec, top } => {
            let all = read_ensemble_spec(spec)?;
            let ids: Vec<String> = all.iter().map(|(id, _)| id.clone()).collect();
            let keep = build_ensemble_n(&ids, top.unwrap_or(ids.len().max(1)))?;
            all.into_iter().take(keep.len()).collect()
        }
    };
    listed.into_iter().map(|(id, p)| Ok((id, load_checkpoint(&p)?.inference_weights()?))).collect()
}

fn one(manifest: &Path, e: &ManifestEntry, models: &[(String, NetworkWeights)], opts: &Options) -> Result<()> {
    let case = load_entry(manifest, e)?;
    let grid = case.grid().clone();
    let (prob, mask) = match models {
        [(_, w)] => infer(w, &case, &grid)?,
        _ => {
            let members: Vec<Member> = models.iter().map(|(id, w)| Member { id, weights: w }).collect();
            ensemble_predict(&members, &case, &grid)?
        }
    };
    save_volume(&prob, opts.out.join(format!("{}_prob.nii.gz", e.id)))?;
    save_volume(&mask, opts.out.join(format!("{}_mask.nii.gz", e.id)))?;
    if opts.native {
        let (Some(t), Some(native)) = (&e.transform, &e.native) else {
            return Err(CliError::Invalid(format!("case {} has no transform or native image; run preprocess first", e.id)));
        };
        let transform = RigidTransform::read(&resolve(manifest, t))?;
        let native = load_volume(resolve(manifest, native))?;
        let back = map_mask_to_native(&mask, &transform, native.grid());
        save_volume(&back, opts.out.join(format!("{}_mask_native.nii.gz", e.id)))?;
    }
    Ok(())
}

pub fn run(models: &Models, opts: &Options) -> Result<()> {
    let manifest = manifest_path(&opts.data);
    let m = Manifest::load(&manifest)?;
    let entries: Vec<ManifestEntry> = m.entries(opts.split).cloned().collect();
    let models = load_models(models)?;
    create_dir(&opts.out)?;
    let results = par_map(&entries, opts.jobs, |e| one(&manifest, e, &models, opts).map_err(|err| CliError::Invalid(format!("case {}: {err}", e.id))));
    results.into_iter().collect::<Result<Vec<()>>>()?;
    println!("predicted {} cases with {} model(s) into {}", entries.len(), models.len(), opts.out.display());
    Ok(())
}
