use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, TopologyConfig};
use crate::harness::experiment::run_repetitions;
use crate::harness::task::TaskData;
use crate::harness::write;
use crate::rng::derive_seed;

/// Every (depth, breadth) with depth * breadth = n_layers, ascending by depth.
pub fn factor_pairs(n_layers: usize) -> Vec<(usize, usize)> {
    (1..=n_layers)
        .filter(|d| n_layers % d == 0)
        .map(|d| (d, n_layers / d))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub n_layers: usize,
    pub depth: usize,
    pub breadth: usize,
    pub neurons: usize,
    pub nrmse_mean: f64,
    pub nrmse_ci: f64,
    pub lambda_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTable {
    pub rows: Vec<PartitionRow>,
    /// (N_L, depth, breadth, reason) of cells that could not be trained.
    pub skipped: Vec<(usize, usize, usize, String)>,
}

impl PartitionTable {
    pub const CSV_HEADER: [&'static str; 7] = [
        "n_l",
        "n_ld",
        "n_lb",
        "n_r",
        "nrmse_mean",
        "nrmse_ci",
        "lambda_max",
    ];

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n_layers.to_string(),
                    r.depth.to_string(),
                    r.breadth.to_string(),
                    r.neurons.to_string(),
                    r.nrmse_mean.to_string(),
                    r.nrmse_ci.to_string(),
                    write::opt(r.lambda_max),
                ]
            })
            .collect();
        write::csv(path, &Self::CSV_HEADER, &rows)
    }
}

/// Splits the neuron budget evenly over every factorization of every
/// reservoir count and trains each arrangement over the config's seeds.
pub fn neuronal_partitioning(cfg: &ExperimentConfig, task: &TaskData) -> Result<PartitionTable> {
    let p = cfg
        .partition
        .as_ref()
        .ok_or_else(|| Error::Config("partitioning needs a [partition] section".into()))?;
    let cells: Vec<(usize, usize, usize)> = p
        .layers
        .iter()
        .flat_map(|&n_l| factor_pairs(n_l).into_iter().map(move |(d, b)| (n_l, d, b)))
        .collect();
    let base_seeds = cfg.repetition_seeds();
    let outcomes: Vec<std::result::Result<PartitionRow, String>> = cells
        .par_iter()
        .map(|&(n_l, depth, breadth)| {
            let mut hp = cfg.hyper.clone();
            hp.neurons = p.budget / n_l;
            let key = format!("partition/{n_l}/{depth}x{breadth}");
            let seeds: Vec<u64> = base_seeds.iter().map(|s| derive_seed(*s, &key)).collect();
            let topo = TopologyConfig { breadth, depth };
            let (_, summary, _, _) =
                run_repetitions(cfg, task, topo, &hp, &seeds).map_err(|e| e.to_string())?;
            let get = |m: &str| summary.iter().find(|s| s.metric == m);
            let nrmse = get("nrmse").ok_or("NRMSE undefined for this task")?;
            Ok(PartitionRow {
                n_layers: n_l,
                depth,
                breadth,
                neurons: hp.neurons,
                nrmse_mean: nrmse.mean,
                nrmse_ci: nrmse.ci95,
                lambda_max: get("lambda_max").map(|s| s.mean),
            })
        })
        .collect();
    let mut table = PartitionTable {
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for ((n_l, d, b), out) in cells.into_iter().zip(outcomes) {
        match out {
            Ok(row) => table.rows.push(row),
            Err(reason) => {
                log::warn!("skipping N_L={n_l} ({d}x{b}): {reason}");
                table.skipped.push((n_l, d, b, reason));
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_pair_cases() {
        assert_eq!(factor_pairs(6), vec![(1, 6), (2, 3), (3, 2), (6, 1)]);
        assert_eq!(factor_pairs(1), vec![(1, 1)]);
        assert_eq!(factor_pairs(12).len(), 6);
        assert_eq!(factor_pairs(49), vec![(1, 49), (7, 7), (49, 1)]);
    }

    #[test]
    fn floor_division_budget() {
        assert_eq!(2048 / 3, 682);
    }
}
