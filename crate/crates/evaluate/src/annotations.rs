//! Cases read by more than one annotator.
//!
//! A ground-truth id `P__k` names annotation `k` of patient `P`; a bare id is
//! annotation 1. Metrics use every annotation, voxel-wise maps one per
//! patient.

use std::collections::BTreeMap;

pub const SEPARATOR: &str = "__";

/// (patient id, annotation priority; lower wins).
pub fn split_annotation(case_id: &str) -> (&str, u32) {
    if let Some((p, k)) = case_id.rsplit_once(SEPARATOR) {
        if let Ok(k) = k.parse() {
            return (p, k);
        }
    }
    (case_id, 1)
}

/// The highest-priority annotation id of each patient, sorted by patient.
pub fn primary_annotations<'a>(case_ids: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut best: BTreeMap<&str, (u32, &str)> = BTreeMap::new();
    for id in case_ids {
        let (patient, k) = split_annotation(id);
        let e = best.entry(patient).or_insert((k, id));
        if (k, id) < *e {
            *e = (k, id);
        }
    }
    best.into_values().map(|(_, id)| id).collect()
}
