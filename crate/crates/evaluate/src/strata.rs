//! Lesion-size strata from total ground-truth lesion volume.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{EvalError, Result};
use crate::metrics::MetricRecord;

pub const SMALL_BELOW_ML: f64 = 5.0;
pub const LARGE_FROM_ML: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stratum {
    Small,
    Medium,
    Large,
}

impl Stratum {
    pub fn of_volume(ml: f64) -> Self {
        if ml < SMALL_BELOW_ML {
            Stratum::Small
        } else if ml < LARGE_FROM_ML {
            Stratum::Medium
        } else {
            Stratum::Large
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stratum::Small => "small",
            Stratum::Medium => "medium",
            Stratum::Large => "large",
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Stratum of each record, looked up by case id in `gt_volumes_ml`.
pub fn stratify(records: &[MetricRecord], gt_volumes_ml: &BTreeMap<String, f64>) -> Result<Vec<Stratum>> {
    records
        .iter()
        .map(|r| gt_volumes_ml.get(&r.case_id).map(|&v| Stratum::of_volume(v)).ok_or_else(|| EvalError::MissingVolume(r.case_id.clone())))
        .collect()
}
