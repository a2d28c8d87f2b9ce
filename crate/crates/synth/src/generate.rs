//! Phantom rendering and dataset splits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use strokeseg_volume::{BinaryMask, CaseRecord, Domain, Volume, VoxelGrid};

use crate::error::{Result, SynthError};
use crate::spec::PhantomSpec;

/// Steepness of the lesion edge per voxel of signed distance; the soft
/// value goes from 0.12 to 0.88 across one voxel.
const EDGE_SLOPE: f64 = 4.0;
/// Voxels beyond the ellipsoid surface still evaluated for the soft edge.
const EDGE_MARGIN: f64 = 3.0;

/// Axis-aligned ellipsoid centred on a voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lesion {
    pub centre: [usize; 3],
    pub radii_mm: [f64; 3],
}

impl Lesion {
    /// Approximate signed distance to the surface in voxels (positive
    /// inside), from the first-order expansion of the ellipsoid function.
    fn signed_distance(&self, c: [usize; 3], spacing: [f64; 3]) -> f64 {
        let mut rho2 = 0.0;
        let mut grad2 = 0.0;
        for k in 0..3 {
            let b = self.radii_mm[k] / spacing[k];
            let u = c[k] as f64 - self.centre[k] as f64;
            rho2 += (u / b).powi(2);
            grad2 += (u / (b * b)).powi(2);
        }
        if rho2 == 0.0 {
            return f64::INFINITY;
        }
        let rho = rho2.sqrt();
        (1.0 - rho) * rho / grad2.sqrt()
    }

    fn bounds(&self, shape: [usize; 3], spacing: [f64; 3]) -> [(usize, usize); 3] {
        std::array::from_fn(|k| {
            let r = (self.radii_mm[k] / spacing[k] + EDGE_MARGIN).ceil() as usize;
            (self.centre[k].saturating_sub(r), (self.centre[k] + r + 1).min(shape[k]))
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Soft lesion occupancy in [0, 1]: the maximum over lesions of a sigmoid of
/// the signed distance. Exactly 0 away from every lesion.
pub fn render_lesions(grid: &VoxelGrid, lesions: &[Lesion]) -> Vec<f64> {
    let shape = grid.shape();
    let spacing = grid.spacing();
    let mut soft = vec![0.0f64; grid.len()];
    for l in lesions {
        let [bx, by, bz] = l.bounds(shape, spacing);
        for z in bz.0..bz.1 {
            for y in by.0..by.1 {
                for x in bx.0..bx.1 {
                    let v = sigmoid(EDGE_SLOPE * l.signed_distance([x, y, z], spacing));
                    let i = grid.index(x, y, z);
                    soft[i] = soft[i].max(v);
                }
            }
        }
    }
    soft
}

/// Label from the soft occupancy, thresholded at one half.
pub fn lesion_mask(grid: &VoxelGrid, soft: &[f64]) -> BinaryMask {
    BinaryMask::new(grid.clone(), soft.iter().map(|&v| u8::from(v >= 0.5)).collect()).expect("length matches grid")
}

/// Normalised ellipsoid coordinate of voxel `c` with semi-axes `axes_mm`
/// about the field-of-view centre.
fn head_rho2(c: [usize; 3], shape: [usize; 3], spacing: [f64; 3], axes_mm: [f64; 3]) -> f64 {
    (0..3).map(|k| ((c[k] as f64 - (shape[k] as f64 - 1.0) / 2.0) * spacing[k] / axes_mm[k]).powi(2)).sum()
}

fn brain_axes(spec: &PhantomSpec) -> [f64; 3] {
    std::array::from_fn(|k| spec.brain_extent[k] * spec.shape[k] as f64 * spec.spacing[k])
}

/// Draws lesion geometry: count, radii, then non-overlapping centres inside
/// the brain.
pub fn draw_lesions(spec: &PhantomSpec, rng: &mut impl Rng, case: &str) -> Result<Vec<Lesion>> {
    let n = rng.random_range(spec.lesion_count.0..=spec.lesion_count.1);
    let brain = brain_axes(spec);
    let mut lesions: Vec<Lesion> = Vec::with_capacity(n);
    for k in 0..n {
        let r = rng.random_range(spec.lesion_radius_mm.0..=spec.lesion_radius_mm.1);
        let radii_mm: [f64; 3] = std::array::from_fn(|_| r * rng.random_range(spec.lesion_elongation.0..=spec.lesion_elongation.1));
        let mut placed = None;
        for _ in 0..spec.placement_attempts {
            let centre: [usize; 3] = std::array::from_fn(|a| rng.random_range(0..spec.shape[a]));
            // the whole ellipsoid has to fit inside the brain
            let shrunk: [f64; 3] = std::array::from_fn(|a| brain[a] - radii_mm[a]);
            if shrunk.iter().any(|&s| s <= 0.0) || head_rho2(centre, spec.shape, spec.spacing, shrunk) > 1.0 {
                continue;
            }
            // keep at least one voxel between lesions along some axis
            let apart = lesions.iter().all(|o| {
                (0..3).map(|a| ((centre[a] as f64 - o.centre[a] as f64) * spec.spacing[a] / (radii_mm[a] + o.radii_mm[a] + spec.spacing[a])).powi(2)).sum::<f64>() > 1.0
            });
            if apart {
                placed = Some(Lesion { centre, radii_mm });
                break;
            }
        }
        let lesion = placed.ok_or_else(|| SynthError::Placement { case: case.to_string(), lesion: k, attempts: spec.placement_attempts })?;
        lesions.push(lesion);
    }
    Ok(lesions)
}

/// One labelled phantom. The label is the thresholded lesion occupancy used
/// to shade the images.
pub fn generate_case(spec: &PhantomSpec, rng: &mut impl Rng, id: &str, domain: Domain) -> Result<CaseRecord> {
    spec.validate()?;
    let grid = spec.grid()?;
    let lesions = draw_lesions(spec, rng, id)?;
    let soft = render_lesions(&grid, &lesions);
    let label = lesion_mask(&grid, &soft);
    let shift = match domain {
        Domain::Source => spec.source,
        Domain::Target => spec.target,
    };
    let brain = brain_axes(spec);
    let skull: [f64; 3] = brain.map(|b| b * (1.0 + spec.skull_thickness));
    let noise = Normal::new(0.0, spec.noise).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let mut dwi = vec![0.0; grid.len()];
    let mut adc = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let c = grid.coords(i);
        let tissue = if head_rho2(c, spec.shape, spec.spacing, brain) <= 1.0 {
            1.0
        } else if head_rho2(c, spec.shape, spec.spacing, skull) <= 1.0 {
            spec.skull_level
        } else {
            continue;
        };
        let d = spec.dwi_brain * tissue * (1.0 + spec.dwi_lesion_gain * soft[i]);
        let a = spec.adc_brain * tissue * (1.0 - spec.adc_lesion_drop * soft[i]);
        dwi[i] = shift.contrast * d + shift.bias + noise.sample(rng);
        adc[i] = shift.contrast * a + shift.bias + noise.sample(rng);
    }
    Ok(CaseRecord::new(id, Volume::new(grid.clone(), dwi)?, Volume::new(grid, adc)?, Some(label), domain)?)
}

/// Which part of a synthetic dataset a case belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Labelled source-domain training cases.
    Source,
    /// Target-domain cases whose labels are withheld.
    TargetUnlabeled,
    /// Labelled target-domain evaluation cases.
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Source, Split::TargetUnlabeled, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Source => "source",
            Split::TargetUnlabeled => "target_unlabeled",
            Split::Test => "test",
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Split::Source => "src",
            Split::TargetUnlabeled => "tgt",
            Split::Test => "test",
        }
    }

    fn domain(self) -> Domain {
        match self {
            Split::Source => Domain::Source,
            _ => Domain::Target,
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSplit {
    pub source: Vec<CaseRecord>,
    pub target_unlabeled: Vec<CaseRecord>,
    pub test: Vec<CaseRecord>,
}

impl SyntheticSplit {
    pub fn get(&self, split: Split) -> &[CaseRecord] {
        match split {
            Split::Source => &self.source,
            Split::TargetUnlabeled => &self.target_unlabeled,
            Split::Test => &self.test,
        }
    }
}

/// Independent generator for case `index` of `split`.
pub fn case_rng(seed: u64, split: Split, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&split.index().to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"phantom\0");
    ChaCha8Rng::from_seed(key)
}

pub fn case_id(split: Split, index: usize) -> String {
    format!("{}-{index:03}", split.prefix())
}

pub fn generate_split(spec: &PhantomSpec, n_source: usize, n_target_unlabeled: usize, n_test: usize, seed: u64) -> Result<SyntheticSplit> {
    spec.validate()?;
    let make = |split: Split, n: usize| -> Result<Vec<CaseRecord>> {
        (0..n)
            .map(|i| {
                let case = generate_case(spec, &mut case_rng(seed, split, i as u64), &case_id(split, i), split.domain())?;
                Ok(if split == Split::TargetUnlabeled { case.without_label() } else { case })
            })
            .collect()
    };
    Ok(SyntheticSplit { source: make(Split::Source, n_source)?, target_unlabeled: make(Split::TargetUnlabeled, n_target_unlabeled)?, test: make(Split::Test, n_test)? })
}
