use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, SweepParameter, TopologyConfig};
use crate::harness::experiment::run_repetitions;
use crate::harness::task::TaskData;
use crate::harness::write;
use crate::metrics::pearson;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub breadth: usize,
    pub depth: usize,
    pub nrmse: Option<f64>,
    pub lambda_max: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub cells: Vec<SweepCell>,
    /// Pearson correlation of NRMSE and lambda_max over complete cells.
    pub pearson: Option<f64>,
}

impl SweepResult {
    /// Swept value of the cell with the lowest NRMSE.
    pub fn argmin_value(&self) -> Option<f64> {
        self.cells
            .iter()
            .filter_map(|c| c.nrmse.map(|n| (n, c.value)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, v)| v)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.value.to_string(),
                    c.breadth.to_string(),
                    c.depth.to_string(),
                    write::opt(c.nrmse),
                    write::opt(c.lambda_max),
                    c.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
                ]
            })
            .collect();
        write::csv(
            path,
            &[
                self.parameter.name(),
                "breadth",
                "depth",
                "nrmse",
                "lambda_max",
                "error",
            ],
            &rows,
        )
    }
}

/// Trains every (value, breadth, depth) cell and correlates NRMSE with
/// lambda_max. Failed cells are kept with their error and no scores.
pub fn param_sweep(cfg: &ExperimentConfig, task: &TaskData) -> Result<SweepResult> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweeping needs a [sweep] section".into()))?;
    let cells: Vec<(f64, usize, usize)> = s
        .values
        .iter()
        .flat_map(|&v| s.grid.iter().map(move |c| (v, c[0], c[1])))
        .collect();
    let base_seeds = cfg.repetition_seeds();
    let out: Vec<SweepCell> = cells
        .par_iter()
        .map(|&(value, breadth, depth)| {
            let mut hp = cfg.hyper.clone();
            s.parameter.apply(&mut hp, value);
            let key = format!("sweep/{}/{breadth}x{depth}", s.parameter.name());
            let seeds: Vec<u64> = base_seeds.iter().map(|x| derive_seed(*x, &key)).collect();
            let mut cell = SweepCell {
                value,
                breadth,
                depth,
                nrmse: None,
                lambda_max: None,
                error: None,
            };
            match run_repetitions(cfg, task, TopologyConfig { breadth, depth }, &hp, &seeds) {
                Ok((_, summary, _, _)) => {
                    let get = |m: &str| summary.iter().find(|x| x.metric == m).map(|x| x.mean);
                    cell.nrmse = get("nrmse");
                    cell.lambda_max = get("lambda_max");
                }
                Err(e) => {
                    log::warn!("sweep cell {value} {breadth}x{depth} failed: {e}");
                    cell.error = Some(e.to_string());
                }
            }
            cell
        })
        .collect();
    let (a, b): (Vec<f64>, Vec<f64>) = out
        .iter()
        .filter_map(|c| Some((c.nrmse?, c.lambda_max?)))
        .unzip();
    let pearson = if a.len() >= 2 {
        pearson(&b, &a).ok()
    } else {
        None
    };
    Ok(SweepResult {
        parameter: s.parameter,
        cells: out,
        pearson,
    })
}
