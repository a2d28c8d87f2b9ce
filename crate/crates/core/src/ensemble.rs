//! Probability-averaging ensembles.

use strokeseg_volume::{BinaryMask, CaseRecord, ProbabilityMap, VoxelGrid};

use crate::error::{CoreError, Result};
use crate::network::NetworkWeights;
use crate::training::{predict_probability, THRESHOLD};

/// A model tagged with the id that fixes its place in the summation order.
#[derive(Debug, Clone, Copy)]
pub struct Member<'a> {
    pub id: &'a str,
    pub weights: &'a NetworkWeights,
}

/// Mean of per-voxel probabilities, accumulated as deviations from the first
/// map. Identical maps therefore average to themselves exactly, and the
/// result is clamped to the per-voxel range of its inputs.
pub fn mean_probability(maps: &[ProbabilityMap]) -> Result<ProbabilityMap> {
    let first = maps.first().ok_or(CoreError::Empty("model list"))?;
    for m in maps {
        first.grid().ensure_matches(m.grid(), "ensemble member")?;
    }
    let k = maps.len() as f64;
    let data = (0..first.data().len())
        .map(|i| {
            let p0 = first.data()[i];
            let (mut dev, mut lo, mut hi) = (0.0, p0, p0);
            for m in &maps[1..] {
                let p = m.data()[i];
                dev += p - p0;
                lo = lo.min(p);
                hi = hi.max(p);
            }
            (p0 + dev / k).clamp(lo, hi)
        })
        .collect();
    Ok(ProbabilityMap::new(first.grid().clone(), data)?)
}

/// Averages the members' final-head probabilities (in sorted id order) and
/// thresholds the mean at 0.5.
pub fn ensemble_predict(members: &[Member], case: &CaseRecord, grid: &VoxelGrid) -> Result<(ProbabilityMap, BinaryMask)> {
    if members.is_empty() {
        return Err(CoreError::Empty("model list"));
    }
    grid.ensure_matches(case.grid(), &format!("case {}", case.id))?;
    let mut sorted = members.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(b.id));
    let maps = sorted.iter().map(|m| predict_probability(m.weights, case)).collect::<Result<Vec<_>>>()?;
    let p = mean_probability(&maps)?;
    let mask = p.threshold(THRESHOLD);
    Ok((p, mask))
}

/// The first `n` ids of a best-first ranking.
pub fn build_ensemble_n(ranked: &[String], n: usize) -> Result<Vec<String>> {
    if n == 0 || n > ranked.len() {
        return Err(CoreError::OutOfRange(format!("ensemble size {n} for {} ranked models", ranked.len())));
    }
    Ok(ranked[..n].to_vec())
}
