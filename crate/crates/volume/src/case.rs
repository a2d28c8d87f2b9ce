use serde::{Deserialize, Serialize};

use crate::error::{Result, VolumeError};
use crate::volume::{BinaryMask, Volume};

/// Which side of the domain-adaptation split a case belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

/// One participant: DWI and ADC on a shared grid, optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub id: String,
    pub dwi: Volume,
    pub adc: Volume,
    pub label: Option<BinaryMask>,
    pub domain: Domain,
}

impl CaseRecord {
    pub fn new(id: impl Into<String>, dwi: Volume, adc: Volume, label: Option<BinaryMask>, domain: Domain) -> Result<Self> {
        let id = id.into();
        dwi.grid().ensure_matches(adc.grid(), &format!("case {id}: ADC vs DWI"))?;
        if let Some(l) = &label {
            dwi.grid().ensure_matches(l.grid(), &format!("case {id}: label vs DWI"))?;
        }
        Ok(Self { id, dwi, adc, label, domain })
    }

    pub fn grid(&self) -> &crate::VoxelGrid {
        self.dwi.grid()
    }

    /// The same case with its label withheld.
    pub fn without_label(mut self) -> Self {
        self.label = None;
        self
    }
}

/// Checks that ids are unique within a dataset.
pub fn ensure_unique_ids(cases: &[CaseRecord]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for c in cases {
        if !seen.insert(c.id.as_str()) {
            return Err(VolumeError::DuplicateId(c.id.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::VoxelGrid;

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = VoxelGrid::las([4, 4, 2], [1.0; 3]).unwrap();
        let b = VoxelGrid::las([4, 4, 3], [1.0; 3]).unwrap();
        let c = VoxelGrid::las([4, 4, 2], [1.0, 1.0, 2.0]).unwrap();
        let ok = CaseRecord::new("a", Volume::zeros(a.clone()), Volume::zeros(a.clone()), None, Domain::Source);
        assert!(ok.is_ok());
        assert!(CaseRecord::new("b", Volume::zeros(a.clone()), Volume::zeros(b), None, Domain::Source).is_err());
        let label = BinaryMask::empty(c);
        assert!(CaseRecord::new("c", Volume::zeros(a.clone()), Volume::zeros(a), Some(label), Domain::Target).is_err());
    }
}
