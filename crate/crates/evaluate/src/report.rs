//! Text outputs: the per-case metrics CSV and the ranking report.

use std::fmt::Write;

use crate::metrics::{Metric, MetricRecord};
use crate::ranking::RankingTable;
use crate::strata::Stratum;

pub const METRICS_HEADER: &str = "case_id,model_id,dsc,avd_ml,ald,f1,hd95,precision,recall,stratum";

/// One row per record; `strata` is parallel to `records` when given.
pub fn metrics_csv(records: &[MetricRecord], strata: Option<&[Stratum]>) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for (i, r) in records.iter().enumerate() {
        let stratum = strata.map(|s| s[i].name()).unwrap_or("");
        writeln!(out, "{},{},{},{},{},{},{},{},{},{}", r.case_id, r.model_id, r.dsc, r.avd, r.ald, r.f1, r.hd95, r.precision, r.recall, stratum).unwrap();
    }
    out
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Table with one line per model, best first: the overall mean rank, then
/// `median (mean rank)` for each metric.
pub fn ranking_report(records: &[MetricRecord], table: &RankingTable) -> String {
    let mut rows = vec![["model".to_string(), "mean rank".to_string()].into_iter().chain(Metric::ALL.iter().map(|m| m.name().to_string())).collect::<Vec<_>>()];
    for model in table.order() {
        let mut row = vec![model.to_string(), format!("{:.2}", table.overall[model])];
        for metric in Metric::ALL {
            let mut v: Vec<f64> = records.iter().filter(|r| r.model_id == model).map(|r| r.value(metric)).collect();
            let digits = if metric == Metric::Ald { 1 } else { 3 };
            row.push(format!("{:.*} ({:.2})", digits, median(&mut v), table.metric_mean_ranks[&(model.to_string(), metric)]));
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (k, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        writeln!(out, "| {} |", cells.join(" | ")).unwrap();
        if k == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            writeln!(out, "|-{}-|", rule.join("-|-")).unwrap();
        }
    }
    writeln!(out, "\ncases: {}; cells: median (mean rank); models ordered by mean rank", table.cases.len()).unwrap();
    out
}
