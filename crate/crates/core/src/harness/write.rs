//! Output files: JSON documents and tidy CSV tables.

use std::path::Path;

use serde::Serialize;

use crate::diagnostics::SeparationSample;
use crate::error::{Error, Result};
use crate::harness::experiment::{PsoSummary, ResultRecord};
use crate::metrics::MetricReport;

pub fn json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Renders a CSV table; cells must not contain commas or quotes.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        debug_assert_eq!(r.len(), header.len());
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

pub fn csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    std::fs::write(path, csv_string(header, rows)).map_err(|e| Error::io(path, e))
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn pso_outputs(dir: &Path, summary: &PsoSummary) -> Result<()> {
    json(&dir.join("pso_best.json"), summary)?;
    let rows: Vec<Vec<String>> = summary
        .trace
        .iter()
        .enumerate()
        .map(|(i, s)| vec![(i + 1).to_string(), s.to_string()])
        .collect();
    csv(
        &dir.join("pso_trace.csv"),
        &["iteration", "best_score"],
        &rows,
    )
}

pub fn record_outputs(dir: &Path, record: &ResultRecord) -> Result<()> {
    json(&dir.join("record.json"), record)?;
    let mut header = vec!["seed", "beta", "validation_score"];
    header.extend(MetricReport::CSV_HEADER);
    let rows: Vec<Vec<String>> = record
        .repetitions
        .iter()
        .map(|r| {
            let mut row = vec![
                r.seed.to_string(),
                r.beta.to_string(),
                r.validation_score.to_string(),
            ];
            row.extend(r.test.csv_row());
            row
        })
        .collect();
    csv(&dir.join("repetitions.csv"), &header, &rows)?;
    let rows: Vec<Vec<String>> = record
        .summary
        .iter()
        .map(|s| {
            vec![
                s.metric.clone(),
                s.mean.to_string(),
                s.ci95.to_string(),
                s.n.to_string(),
            ]
        })
        .collect();
    csv(
        &dir.join("summary.csv"),
        &["metric", "mean", "ci95", "n"],
        &rows,
    )
}

pub fn separation_csv(path: &Path, sample: &SeparationSample) -> Result<()> {
    let rows: Vec<Vec<String>> = sample
        .points
        .iter()
        .map(|p| vec![p.input_sep.to_string(), p.output_sep.to_string()])
        .collect();
    csv(path, &["input_sep", "output_sep"], &rows)
}
