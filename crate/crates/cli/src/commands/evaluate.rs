use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use strokeseg_evaluate::annotations::{primary_annotations, split_annotation};
use strokeseg_evaluate::{case_level_ranking, evaluate_case, metrics_csv, ranking_report, stratify, voxelwise_maps, MetricOptions, MetricRecord};
use strokeseg_volume::{load_mask, save_volume, BinaryMask};

use super::{create_dir, write_file};
use crate::error::{io, CliError, Result};
use crate::jobs::par_map;

const NII: &str = ".nii.gz";
const LABEL: &str = "_label.nii.gz";
const MASK: &str = "_mask.nii.gz";

/// Ground-truth masks of a directory by case id, sorted. A directory holding
/// `<id>_label.nii.gz` files (a preprocess output) contributes only those;
/// otherwise every `<id>.nii.gz`.
pub fn ground_truth(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io(dir))? {
        let entry = entry.map_err(io(dir))?;
        if let Some(name) = entry.file_name().to_str().filter(|n| n.ends_with(NII)) {
            names.push(name.to_string());
        }
    }
    let suffix = if names.iter().any(|n| n.ends_with(LABEL)) { LABEL } else { NII };
    let mut out: Vec<_> = names.iter().filter_map(|n| n.strip_suffix(suffix).map(|id| (id.to_string(), dir.join(n)))).collect();
    out.sort();
    if out.is_empty() {
        return Err(CliError::Invalid(format!("no ground-truth masks in {}", dir.display())));
    }
    Ok(out)
}

/// The prediction for a ground-truth id: the first of
/// `<patient>_mask.nii.gz`, `<patient>_label.nii.gz`, `<patient>.nii.gz`.
pub fn find_prediction(dir: &Path, case_id: &str) -> Option<PathBuf> {
    let (patient, _) = split_annotation(case_id);
    [MASK, LABEL, NII].into_iter().map(|s| dir.join(format!("{patient}{s}"))).find(|p| p.is_file())
}

pub fn prediction(dir: &Path, case_id: &str) -> Result<PathBuf> {
    find_prediction(dir, case_id).ok_or_else(|| CliError::Invalid(format!("no prediction for case {case_id} in {}", dir.display())))
}

/// The ground-truth cases that `pred_dir` has predictions for.
fn covered(gt: Vec<(String, PathBuf)>, pred_dir: &Path, gt_dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let total = gt.len();
    let kept: Vec<_> = gt.into_iter().filter(|(id, _)| find_prediction(pred_dir, id).is_some()).collect();
    if kept.is_empty() {
        return Err(CliError::Invalid(format!("{} holds no predictions for the cases in {}", pred_dir.display(), gt_dir.display())));
    }
    if kept.len() < total {
        eprintln!("note: {} of {total} ground-truth cases have predictions in {}", kept.len(), pred_dir.display());
    }
    Ok(kept)
}

fn model_id(dir: &Path) -> String {
    dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string())
}

fn load_pair(pred_dir: &Path, id: &str, gt: &Path) -> Result<(BinaryMask, BinaryMask)> {
    Ok((load_mask(prediction(pred_dir, id)?)?, load_mask(gt)?))
}

/// Metrics of one model over every ground-truth case, with each case's
/// ground-truth lesion volume.
fn score(pred_dir: &Path, model: &str, gt: &[(String, PathBuf)], jobs: usize) -> Result<(Vec<MetricRecord>, BTreeMap<String, f64>)> {
    let opts = MetricOptions::default();
    let scored = par_map(gt, jobs, |(id, path)| -> Result<_> {
        let (pred, truth) = load_pair(pred_dir, id, path)?;
        Ok((evaluate_case(id, model, &pred, &truth, &opts)?, truth.volume_ml()))
    });
    let mut records = Vec::with_capacity(gt.len());
    let mut volumes = BTreeMap::new();
    for (id, s) in gt.iter().map(|(id, _)| id).zip(scored) {
        let (r, v) = s?;
        records.push(r);
        volumes.insert(id.clone(), v);
    }
    Ok((records, volumes))
}

fn csv(records: &[MetricRecord], volumes: &BTreeMap<String, f64>, strata: bool) -> Result<String> {
    let strata = if strata { Some(stratify(records, volumes)?) } else { None };
    Ok(metrics_csv(records, strata.as_deref()))
}

pub fn run_evaluate(pred_dir: &Path, gt_dir: &Path, out: &Path, model: Option<String>, strata: bool, jobs: usize) -> Result<()> {
    let gt = covered(ground_truth(gt_dir)?, pred_dir, gt_dir)?;
    let model = model.unwrap_or_else(|| model_id(pred_dir));
    let (records, volumes) = score(pred_dir, &model, &gt, jobs)?;
    write_file(out, csv(&records, &volumes, strata)?)?;
    println!("evaluated {} cases of {model}", records.len());
    Ok(())
}

pub fn run_rank(pred_dirs: &[PathBuf], gt_dir: &Path, out: &Path, metrics_out: Option<&Path>, strata: bool, jobs: usize) -> Result<()> {
    let first = pred_dirs.first().ok_or_else(|| CliError::Invalid("no prediction directories".into()))?;
    let gt = covered(ground_truth(gt_dir)?, first, gt_dir)?;
    let mut records = Vec::new();
    let mut volumes = BTreeMap::new();
    let mut seen = Vec::new();
    for dir in pred_dirs {
        let model = model_id(dir);
        if seen.contains(&model) {
            return Err(CliError::Invalid(format!("two prediction directories are named {model}")));
        }
        let (r, v) = score(dir, &model, &gt, jobs)?;
        records.extend(r);
        volumes = v;
        seen.push(model);
    }
    let table = case_level_ranking(&records)?;
    write_file(out, ranking_report(&records, &table))?;
    if let Some(p) = metrics_out {
        write_file(p, csv(&records, &volumes, strata)?)?;
    }
    println!("ranked {} models: {}", seen.len(), table.order().join(" > "));
    Ok(())
}

pub fn run_maps(pred_dir: &Path, gt_dir: &Path, out: &Path) -> Result<()> {
    let gt = covered(ground_truth(gt_dir)?, pred_dir, gt_dir)?;
    let paths: BTreeMap<&str, &PathBuf> = gt.iter().map(|(id, p)| (id.as_str(), p)).collect();
    let pairs = primary_annotations(gt.iter().map(|(id, _)| id.as_str()))
        .into_iter()
        .map(|id| load_pair(pred_dir, id, paths[id]))
        .collect::<Result<Vec<_>>>()?;
    let maps = voxelwise_maps(&pairs)?;
    create_dir(out)?;
    for (name, v) in maps.iter() {
        save_volume(v, out.join(format!("{name}{NII}")))?;
    }
    println!("wrote voxel-wise maps over {} cases to {}", pairs.len(), out.display());
    Ok(())
}
