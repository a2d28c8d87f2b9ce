//! The run configuration file read by `train` and `adapt`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use strokeseg_core::{MTConfig, NetworkConfig, TrainConfig};

use crate::error::{io, CliError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub mean_teacher: MeanTeacherSection,
}

/// Mean Teacher settings; the training schedule comes from `[train]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanTeacherSection {
    pub consistency_weight: f64,
    pub rampup_epochs: usize,
    pub ema_decay_rampup: f64,
    pub ema_decay_final: f64,
}

impl Default for MeanTeacherSection {
    fn default() -> Self {
        let d = MTConfig::default();
        Self { consistency_weight: d.consistency_weight, rampup_epochs: d.rampup_epochs, ema_decay_rampup: d.ema_decay_rampup, ema_decay_final: d.ema_decay_final }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        Self::from_toml(&text).map_err(|reason| CliError::Parse { path: path.into(), reason })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn mt_config(&self) -> MTConfig {
        let m = &self.mean_teacher;
        MTConfig {
            consistency_weight: m.consistency_weight,
            rampup_epochs: m.rampup_epochs,
            ema_decay_rampup: m.ema_decay_rampup,
            ema_decay_final: m.ema_decay_final,
            base: self.train.clone(),
        }
    }
}
