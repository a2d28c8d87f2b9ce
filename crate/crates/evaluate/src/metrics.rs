//! Case-level overlap, volume, lesion and distance metrics.

use strokeseg_volume::BinaryMask;

use crate::components::{connected_components_with, Connectivity, LesionComponents};
use crate::edt::squared_distance_mm2;
use crate::error::{EvalError, Result};

/// The five metrics entering the case-level ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Dsc,
    Avd,
    Ald,
    F1,
    Hd95,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Dsc, Metric::Avd, Metric::Ald, Metric::F1, Metric::Hd95];

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Dsc | Metric::F1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Dsc => "DSC",
            Metric::Avd => "AVD",
            Metric::Ald => "ALD",
            Metric::F1 => "F1",
            Metric::Hd95 => "HD95",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub case_id: String,
    pub model_id: String,
    pub dsc: f64,
    /// ml
    pub avd: f64,
    pub ald: usize,
    pub f1: f64,
    /// mm
    pub hd95: f64,
    pub precision: f64,
    pub recall: f64,
}

impl MetricRecord {
    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Dsc => self.dsc,
            Metric::Avd => self.avd,
            Metric::Ald => self.ald as f64,
            Metric::F1 => self.f1,
            Metric::Hd95 => self.hd95,
        }
    }
}

/// What HD95 reports when exactly one of the two masks is empty.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EmptyDistance {
    /// World-space diagonal of the grid.
    #[default]
    GridDiagonal,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricOptions {
    pub connectivity: Connectivity,
    pub one_empty_hd95: EmptyDistance,
}

fn same_grid(pred: &BinaryMask, gt: &BinaryMask) -> Result<()> {
    if pred.grid().matches(gt.grid()) {
        Ok(())
    } else {
        Err(EvalError::GridMismatch(format!("prediction {:?} vs ground truth {:?}", pred.grid().shape(), gt.grid().shape())))
    }
}

fn overlap(pred: &BinaryMask, gt: &BinaryMask) -> usize {
    pred.data().iter().zip(gt.data()).filter(|(p, g)| **p != 0 && **g != 0).count()
}

pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    same_grid(pred, gt)?;
    let (p, g) = (pred.count(), gt.count());
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * overlap(pred, gt) as f64 / (p + g) as f64)
}

/// Absolute volume difference in ml.
pub fn avd(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    same_grid(pred, gt)?;
    Ok(pred.count().abs_diff(gt.count()) as f64 * gt.grid().voxel_volume_ml())
}

pub fn ald(pred: &BinaryMask, gt: &BinaryMask) -> Result<usize> {
    ald_with(pred, gt, Connectivity::default())
}

pub fn ald_with(pred: &BinaryMask, gt: &BinaryMask, connectivity: Connectivity) -> Result<usize> {
    same_grid(pred, gt)?;
    let p = connected_components_with(pred, connectivity).count();
    let g = connected_components_with(gt, connectivity).count();
    Ok(p.abs_diff(g))
}

/// Components of `comps` that share at least one voxel with `other`.
fn hit_count(comps: &LesionComponents, other: &BinaryMask) -> usize {
    let mut hit = vec![false; comps.count()];
    for (i, &l) in comps.labels.iter().enumerate() {
        if l != 0 && other.get(i) {
            hit[l as usize - 1] = true;
        }
    }
    hit.iter().filter(|&&h| h).count()
}

pub fn lesion_f1(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    lesion_f1_with(pred, gt, Connectivity::default())
}

pub fn lesion_f1_with(pred: &BinaryMask, gt: &BinaryMask, connectivity: Connectivity) -> Result<f64> {
    same_grid(pred, gt)?;
    let pc = connected_components_with(pred, connectivity);
    let gc = connected_components_with(gt, connectivity);
    let tp = hit_count(&gc, pred);
    let fn_ = gc.count() - tp;
    let fp = pc.count() - hit_count(&pc, gt);
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / denom as f64)
}

/// Quantile with linear interpolation between order statistics at
/// position `q (n - 1)`. `sorted` must be ascending and non-empty.
pub fn quantile_inclusive(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 95th percentile of d(a, B) over the foreground voxels a of `a`.
fn directed_hd95(a: &BinaryMask, b_sq: &[f64]) -> f64 {
    let mut d: Vec<f64> = (0..a.data().len()).filter(|&i| a.get(i)).map(|i| b_sq[i].sqrt()).collect();
    d.sort_by(f64::total_cmp);
    quantile_inclusive(&d, 0.95)
}

pub fn hd95(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    hd95_with(pred, gt, EmptyDistance::default())
}

pub fn hd95_with(pred: &BinaryMask, gt: &BinaryMask, one_empty: EmptyDistance) -> Result<f64> {
    same_grid(pred, gt)?;
    match (pred.is_empty(), gt.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => {
            return Ok(match one_empty {
                EmptyDistance::GridDiagonal => gt.grid().diagonal_mm(),
                EmptyDistance::Fixed(v) => v,
            })
        }
        _ => {}
    }
    let to_gt = directed_hd95(pred, &squared_distance_mm2(gt));
    let to_pred = directed_hd95(gt, &squared_distance_mm2(pred));
    Ok(to_gt.max(to_pred))
}

/// Voxel-level precision and recall.
pub fn precision_recall(pred: &BinaryMask, gt: &BinaryMask) -> Result<(f64, f64)> {
    same_grid(pred, gt)?;
    let (p, g, o) = (pred.count(), gt.count(), overlap(pred, gt));
    let ratio = |den: usize, other: usize| {
        if den > 0 {
            o as f64 / den as f64
        } else if other == 0 {
            1.0
        } else {
            0.0
        }
    };
    Ok((ratio(p, g), ratio(g, p)))
}

/// All metrics for one (prediction, ground truth) pair.
pub fn evaluate_case(case_id: &str, model_id: &str, pred: &BinaryMask, gt: &BinaryMask, opts: &MetricOptions) -> Result<MetricRecord> {
    let (precision, recall) = precision_recall(pred, gt)?;
    Ok(MetricRecord {
        case_id: case_id.to_string(),
        model_id: model_id.to_string(),
        dsc: dice(pred, gt)?,
        avd: avd(pred, gt)?,
        ald: ald_with(pred, gt, opts.connectivity)?,
        f1: lesion_f1_with(pred, gt, opts.connectivity)?,
        hd95: hd95_with(pred, gt, opts.one_empty_hd95)?,
        precision,
        recall,
    })
}
