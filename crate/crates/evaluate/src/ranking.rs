//! Case-level ranking: rank models per case and metric, average the ranks
//! per metric, then average the five metric means.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{EvalError, Result};
use crate::metrics::{Metric, MetricRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct RankingTable {
    pub models: Vec<String>,
    pub cases: Vec<String>,
    /// (case, model, metric) -> rank in 1..=M, ties averaged.
    pub case_ranks: BTreeMap<(String, String, Metric), f64>,
    pub metric_mean_ranks: BTreeMap<(String, Metric), f64>,
    pub overall: BTreeMap<String, f64>,
}

impl RankingTable {
    /// Models ordered best first; equal scores fall back to model id.
    pub fn order(&self) -> Vec<&str> {
        let mut m: Vec<&str> = self.models.iter().map(String::as_str).collect();
        m.sort_by(|a, b| self.overall[*a].total_cmp(&self.overall[*b]).then(a.cmp(b)));
        m
    }
}

/// Average ranks of `values` (1 = best). Equal values share the mean of the
/// positions they occupy.
pub fn average_ranks(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = values[a].total_cmp(&values[b]);
        if higher_is_better {
            o.reverse()
        } else {
            o
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

pub fn case_level_ranking(records: &[MetricRecord]) -> Result<RankingTable> {
    if records.is_empty() {
        return Err(EvalError::Empty("no metric records to rank"));
    }
    let mut cells: BTreeMap<(&str, &str), &MetricRecord> = BTreeMap::new();
    for r in records {
        for m in Metric::ALL {
            if !r.value(m).is_finite() {
                return Err(EvalError::NonFinite { case_id: r.case_id.clone(), model_id: r.model_id.clone(), metric: m.name() });
            }
        }
        if cells.insert((&r.case_id, &r.model_id), r).is_some() {
            return Err(EvalError::Duplicate { case_id: r.case_id.clone(), model_id: r.model_id.clone() });
        }
    }
    let models: Vec<String> = records.iter().map(|r| r.model_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let cases: Vec<String> = records.iter().map(|r| r.case_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if cells.len() != models.len() * cases.len() {
        let missing = cases
            .iter()
            .flat_map(|c| models.iter().map(move |m| (c, m)))
            .find(|(c, m)| !cells.contains_key(&(c.as_str(), m.as_str())))
            .map(|(c, m)| format!("case {c:?}, model {m:?}"))
            .unwrap_or_default();
        return Err(EvalError::MissingCell(missing));
    }

    let mut case_ranks = BTreeMap::new();
    let mut sums: BTreeMap<(String, Metric), f64> = BTreeMap::new();
    for case in &cases {
        for metric in Metric::ALL {
            let values: Vec<f64> = models.iter().map(|m| cells[&(case.as_str(), m.as_str())].value(metric)).collect();
            for (model, r) in models.iter().zip(average_ranks(&values, metric.higher_is_better())) {
                case_ranks.insert((case.clone(), model.clone(), metric), r);
                *sums.entry((model.clone(), metric)).or_default() += r;
            }
        }
    }
    let n = cases.len() as f64;
    let metric_mean_ranks: BTreeMap<_, _> = sums.into_iter().map(|(k, s)| (k, s / n)).collect();
    let overall = models
        .iter()
        .map(|m| {
            let s: f64 = Metric::ALL.iter().map(|&k| metric_mean_ranks[&(m.clone(), k)]).sum();
            (m.clone(), s / Metric::ALL.len() as f64)
        })
        .collect();
    Ok(RankingTable { models, cases, case_ranks, metric_mean_ranks, overall })
}
