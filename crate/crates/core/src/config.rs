//! Configuration types. All of them deserialize from TOML and reject
//! unknown keys, so a typo in a config file is an error rather than a silent
//! default.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    StdUNet,
    ResUNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttentionKind {
    #[serde(rename = "none")]
    None,
    SE,
    AGs,
    AGh,
    CBAM,
    #[serde(rename = "SE_AGs")]
    SeAGs,
}

impl AttentionKind {
    pub const ALL: [AttentionKind; 6] = [Self::None, Self::SE, Self::AGs, Self::AGh, Self::CBAM, Self::SeAGs];

    pub fn has_se(self) -> bool {
        matches!(self, Self::SE | Self::SeAGs)
    }

    pub fn has_gate(self) -> bool {
        matches!(self, Self::AGs | Self::AGh | Self::SeAGs)
    }

    /// Gate coefficients per encoder channel rather than one per voxel.
    pub fn hybrid_gate(self) -> bool {
        self == Self::AGh
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub block: BlockKind,
    pub attention: AttentionKind,
    pub deep_supervision: bool,
    pub encoder_filters: [usize; 5],
    pub bottleneck_filters: usize,
    pub gn_groups: usize,
    pub dropout_rate: f64,
    pub se_reduction: usize,
    /// Attention-gate intermediate channels are `encoder channels / ag_reduction`.
    pub ag_reduction: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            block: BlockKind::StdUNet,
            attention: AttentionKind::None,
            deep_supervision: false,
            encoder_filters: [16, 32, 64, 128, 256],
            bottleneck_filters: 512,
            gn_groups: 8,
            dropout_rate: 0.5,
            se_reduction: 8,
            ag_reduction: 2,
        }
    }
}

impl NetworkConfig {
    /// A small network for desk-scale runs and tests.
    pub fn desk(block: BlockKind, attention: AttentionKind, deep_supervision: bool) -> Self {
        Self {
            block,
            attention,
            deep_supervision,
            encoder_filters: [8, 8, 16, 16, 16],
            bottleneck_filters: 16,
            gn_groups: 4,
            se_reduction: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::Config(m));
        if self.gn_groups == 0 {
            return bad("gn_groups must be positive".into());
        }
        let widths = self.encoder_filters.iter().chain(std::iter::once(&self.bottleneck_filters));
        for &f in widths {
            if f == 0 || f % self.gn_groups != 0 {
                return bad(format!("filter count {f} is not a positive multiple of gn_groups {}", self.gn_groups));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.se_reduction == 0 || self.ag_reduction == 0 {
            return bad("reduction ratios must be positive".into());
        }
        if matches!(self.attention, AttentionKind::SE | AttentionKind::SeAGs | AttentionKind::CBAM) {
            for &f in &self.encoder_filters {
                if f % self.se_reduction != 0 {
                    return bad(format!("se_reduction {} does not divide {f} channels", self.se_reduction));
                }
            }
        }
        Ok(())
    }

    pub fn head_count(&self) -> usize {
        if self.deep_supervision {
            6
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "GDL_BCE")]
    GdlBce,
    #[serde(rename = "UFL")]
    Ufl,
}

pub const DS_WEIGHTS: [f64; 6] = [0.03, 0.045, 0.05, 0.125, 0.25, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub kind: LossKind,
    pub ufl_lambda: f64,
    pub ufl_delta: f64,
    pub ufl_gamma: f64,
    pub ds_weights: [f64; 6],
    pub gdl_epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { kind: LossKind::GdlBce, ufl_lambda: 0.5, ufl_delta: 0.6, ufl_gamma: 0.5, ds_weights: DS_WEIGHTS, gdl_epsilon: 1e-5 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.ds_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::Config(format!("ds_weights sum to {sum}, expected 1")));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.ufl_lambda) || !unit.contains(&self.ufl_delta) || !(0.0..1.0).contains(&self.ufl_gamma) {
            return Err(CoreError::Config("UFL parameters need lambda, delta in [0, 1] and gamma in [0, 1)".into()));
        }
        if !(self.gdl_epsilon > 0.0) {
            return Err(CoreError::Config("gdl_epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationSpec {
    /// Probability of a left-right flip.
    pub flip_prob: f64,
    /// Maximum absolute shift per axis, in voxels (drawn continuously).
    pub max_translation: [f64; 3],
    /// Maximum absolute rotation about the inferior-superior axis, degrees.
    pub max_rotation_deg: f64,
    pub noise_sigma_range: [f64; 2],
    pub gamma_range: [f64; 2],
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        Self {
            flip_prob: 0.5,
            max_translation: [10.0, 12.0, 2.0],
            max_rotation_deg: 15.0,
            noise_sigma_range: [0.0, 0.15],
            gamma_range: [0.8, 1.2],
        }
    }
}

impl AugmentationSpec {
    /// Draws that always leave a case unchanged.
    pub fn identity() -> Self {
        Self { flip_prob: 0.0, max_translation: [0.0; 3], max_rotation_deg: 0.0, noise_sigma_range: [0.0, 0.0], gamma_range: [1.0, 1.0] }
    }

    /// Translation limits rescaled for a grid `factor` times coarser than the reference.
    pub fn scaled(factor: f64) -> Self {
        let d = Self::default();
        Self { max_translation: [d.max_translation[0] / factor, d.max_translation[1] / factor, d.max_translation[2] / factor], ..d }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2]| r[0] <= r[1];
        if !(0.0..=1.0).contains(&self.flip_prob)
            || self.max_translation.iter().any(|t| !(*t >= 0.0))
            || !(self.max_rotation_deg >= 0.0)
            || !ordered(self.noise_sigma_range)
            || self.noise_sigma_range[0] < 0.0
            || !ordered(self.gamma_range)
            || !(self.gamma_range[0] > 0.0)
        {
            return Err(CoreError::Config(format!("invalid augmentation {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
    pub loss: LossConfig,
    pub augmentation: AugmentationSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 300, batch_size: 8, lr_start: 5e-4, lr_end: 5e-6, seed: 0, loss: LossConfig::default(), augmentation: AugmentationSpec::default() }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(CoreError::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end) {
            return Err(CoreError::Config(format!("need lr_start >= lr_end > 0, got {} and {}", self.lr_start, self.lr_end)));
        }
        self.loss.validate()?;
        self.augmentation.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MTConfig {
    pub consistency_weight: f64,
    pub rampup_epochs: usize,
    pub ema_decay_rampup: f64,
    pub ema_decay_final: f64,
    pub base: TrainConfig,
}

impl Default for MTConfig {
    fn default() -> Self {
        Self { consistency_weight: 5.0, rampup_epochs: 60, ema_decay_rampup: 0.99, ema_decay_final: 0.999, base: TrainConfig::default() }
    }
}

impl MTConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let unit = 0.0..1.0;
        if !unit.contains(&self.ema_decay_rampup) || !unit.contains(&self.ema_decay_final) {
            return Err(CoreError::Config("EMA decays must lie in [0, 1)".into()));
        }
        if self.rampup_epochs > self.base.epochs {
            return Err(CoreError::Config(format!("rampup_epochs {} exceeds epochs {}", self.rampup_epochs, self.base.epochs)));
        }
        if !(self.consistency_weight >= 0.0) {
            return Err(CoreError::Config("consistency_weight must be non-negative".into()));
        }
        Ok(())
    }
}
