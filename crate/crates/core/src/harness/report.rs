use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::experiment::ResultRecord;
use crate::harness::write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format {other}"))),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "task",
    "breadth",
    "depth",
    "neurons",
    "rmse_e3",
    "nrmse_e3",
    "mape_e3",
    "fl_acc_percent",
    "lambda_max",
    "beta",
    "repetitions",
];

/// value * 1000 with at most two decimals, trailing zeros dropped.
pub fn thousandths(v: f64) -> String {
    trim(format!("{:.2}", v * 1000.0))
}

fn trim(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.into()
    }
}

/// One formatted comparison row per record, in [`REPORT_COLUMNS`] order.
pub fn report_rows(records: &[ResultRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| {
            let mean = |m: &str| r.metric(m).map(|s| s.mean);
            vec![
                serde_json::to_value(r.config.task)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                r.topology.breadth.to_string(),
                r.topology.depth.to_string(),
                r.hyper.neurons.to_string(),
                mean("rmse").map(thousandths).unwrap_or_default(),
                mean("nrmse").map(thousandths).unwrap_or_default(),
                mean("mape_fraction").map(thousandths).unwrap_or_default(),
                mean("fl_acc")
                    .map(|v| trim(format!("{:.2}", v * 100.0)))
                    .unwrap_or_default(),
                mean("lambda_max")
                    .map(|v| trim(format!("{v:.4}")))
                    .unwrap_or_default(),
                mean("beta")
                    .map(|v| {
                        if v == 0.0 {
                            "0".into()
                        } else {
                            format!("{v:e}")
                        }
                    })
                    .unwrap_or_default(),
                r.repetitions.len().to_string(),
            ]
        })
        .collect()
}

pub fn markdown_table(rows: &[Vec<String>]) -> String {
    let mut out = format!("| {} |\n", REPORT_COLUMNS.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(REPORT_COLUMNS.len())));
    for r in rows {
        out.push_str(&format!("| {} |\n", r.join(" | ")));
    }
    out
}

/// Parses a table produced by [`markdown_table`] back into cells.
pub fn parse_markdown_table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(2)
        .map(|l| {
            l.trim()
                .trim_start_matches('|')
                .trim_end_matches('|')
                .split('|')
                .map(|c| c.trim().to_string())
                .collect()
        })
        .collect()
}

#[derive(Serialize)]
struct JsonTable<'a> {
    columns: &'a [&'a str],
    rows: &'a [Vec<String>],
}

/// Renders the comparison table of `records`.
pub fn render_report(records: &[ResultRecord], format: ReportFormat) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Config("no records to report".into()));
    }
    let rows = report_rows(records);
    Ok(match format {
        ReportFormat::Csv => write::csv_string(&REPORT_COLUMNS, &rows),
        ReportFormat::Json => {
            serde_json::to_string_pretty(&JsonTable {
                columns: &REPORT_COLUMNS,
                rows: &rows,
            })? + "\n"
        }
        ReportFormat::Markdown => markdown_table(&rows),
    })
}

pub fn emit_report(records: &[ResultRecord], format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(records, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
