use serde::{Deserialize, Serialize};
use strokeseg_volume::VoxelGrid;

use crate::error::{Result, SynthError};

/// Intensity transform `contrast * v + bias` applied inside the head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainShift {
    pub bias: f64,
    pub contrast: f64,
}

impl DomainShift {
    pub const NONE: DomainShift = DomainShift { bias: 0.0, contrast: 1.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSpec {
    pub shape: [usize; 3],
    /// mm
    pub spacing: [f64; 3],
    /// Brain ellipsoid semi-axes as fractions of the field of view.
    pub brain_extent: [f64; 3],
    /// Inclusive range of lesions per case.
    pub lesion_count: (usize, usize),
    /// Range of the nominal lesion radius in mm.
    pub lesion_radius_mm: (f64, f64),
    /// Per-axis radius multiplier range around the nominal radius.
    pub lesion_elongation: (f64, f64),
    pub dwi_brain: f64,
    /// Relative DWI increase at lesion centres.
    pub dwi_lesion_gain: f64,
    pub adc_brain: f64,
    /// Relative ADC decrease at lesion centres.
    pub adc_lesion_drop: f64,
    /// Skull intensity relative to brain, both channels.
    pub skull_level: f64,
    /// Skull shell thickness as a fraction of the brain semi-axes.
    pub skull_thickness: f64,
    /// Standard deviation of the additive noise inside the head.
    pub noise: f64,
    pub source: DomainShift,
    pub target: DomainShift,
    pub placement_attempts: usize,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            shape: [48, 56, 8],
            spacing: [3.6, 3.6, 24.0],
            brain_extent: [0.4, 0.42, 0.42],
            lesion_count: (1, 3),
            lesion_radius_mm: (6.0, 22.0),
            lesion_elongation: (0.8, 1.25),
            dwi_brain: 1.0,
            dwi_lesion_gain: 1.5,
            adc_brain: 1.0,
            adc_lesion_drop: 0.5,
            skull_level: 0.2,
            skull_thickness: 0.12,
            noise: 0.05,
            source: DomainShift::NONE,
            target: DomainShift { bias: 0.25, contrast: 1.15 },
            placement_attempts: 200,
        }
    }
}

impl PhantomSpec {
    /// The full 192x224x32 reference grid at 0.9x0.9x6 mm.
    pub fn reference_scale() -> Self {
        Self { shape: [192, 224, 32], spacing: [0.9, 0.9, 6.0], ..Self::default() }
    }

    pub fn grid(&self) -> Result<VoxelGrid> {
        Ok(VoxelGrid::las(self.shape, self.spacing)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        self.grid()?;
        let (rlo, rhi) = self.lesion_radius_mm;
        if !(rlo > 0.0 && rhi >= rlo && rhi.is_finite()) {
            return bad(format!("lesion radius range {:?}", self.lesion_radius_mm));
        }
        let (elo, ehi) = self.lesion_elongation;
        if !(elo > 0.0 && ehi >= elo && ehi.is_finite()) {
            return bad(format!("lesion elongation range {:?}", self.lesion_elongation));
        }
        if self.lesion_count.0 > self.lesion_count.1 {
            return bad(format!("lesion count range {:?}", self.lesion_count));
        }
        if self.brain_extent.iter().any(|&f| !(f > 0.0 && f * (1.0 + self.skull_thickness) <= 0.5)) {
            return bad(format!("brain extent {:?} with its skull must fit in the field of view", self.brain_extent));
        }
        for (name, s) in [("source", self.source), ("target", self.target)] {
            if !(s.contrast > 0.0 && s.contrast.is_finite() && s.bias.is_finite()) {
                return bad(format!("{name} shift {s:?}"));
            }
        }
        let values = [self.dwi_brain, self.adc_brain, self.dwi_lesion_gain, self.adc_lesion_drop, self.noise, self.skull_level, self.skull_thickness];
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.dwi_brain == 0.0 || self.adc_brain == 0.0 || self.adc_lesion_drop >= 1.0 {
            return bad("intensities must be finite, brain values positive, ADC drop below 1".into());
        }
        if self.placement_attempts == 0 {
            return bad("placement_attempts must be positive".into());
        }
        Ok(())
    }
}

/// Volume in ml of a sphere of radius `r_mm`.
pub fn sphere_volume_ml(r_mm: f64) -> f64 {
    4.0 / 3.0 * std::f64::consts::PI * r_mm.powi(3) / 1000.0
}

/// Radius in mm of a sphere holding `ml` millilitres.
pub fn radius_for_volume_ml(ml: f64) -> f64 {
    (ml * 1000.0 * 3.0 / (4.0 * std::f64::consts::PI)).cbrt()
}
