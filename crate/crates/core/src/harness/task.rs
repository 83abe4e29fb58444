use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;

use crate::data::{
    fit_split_sizes, load_csv_series, load_pianoroll, make_forecast_dataset, moving_average,
    split_series, MinMaxScaler, SeriesDataset, Split,
};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, TaskName};
use crate::readout::Sequence;

/// Sequences of one split; the first `washout` rows of each are unscored.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    pub sequences: Vec<Sequence>,
    pub washout: usize,
}

impl TaskSplit {
    pub fn inputs(&self) -> Vec<DMatrix<f64>> {
        self.sequences.iter().map(|s| s.inputs.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    fn from_dataset(d: SeriesDataset) -> Self {
        TaskSplit {
            sequences: d.sequences,
            washout: d.washout,
        }
    }
}

/// A loaded task. Test data sits behind [`TaskData::test`], which counts
/// every access so model selection can be audited.
#[derive(Debug)]
pub struct TaskData {
    pub name: TaskName,
    pub n_inputs: usize,
    pub train: TaskSplit,
    pub val: TaskSplit,
    test: TaskSplit,
    test_accesses: AtomicUsize,
}

impl TaskData {
    pub fn new(name: TaskName, train: TaskSplit, val: TaskSplit, test: TaskSplit) -> Result<Self> {
        let n_inputs = train
            .sequences
            .first()
            .map(|s| s.inputs.ncols())
            .ok_or_else(|| Error::Data("training split is empty".into()))?;
        if val.is_empty() {
            return Err(Error::Data("validation split is empty".into()));
        }
        Ok(TaskData {
            name,
            n_inputs,
            train,
            val,
            test,
            test_accesses: AtomicUsize::new(0),
        })
    }

    pub fn is_binary(&self) -> bool {
        self.name.is_binary()
    }

    pub fn test(&self) -> &TaskSplit {
        self.test_accesses.fetch_add(1, Ordering::SeqCst);
        &self.test
    }

    pub fn test_accesses(&self) -> usize {
        self.test_accesses.load(Ordering::SeqCst)
    }
}

/// Loads or generates the task data described by `cfg`.
pub fn load_task(cfg: &ExperimentConfig) -> Result<TaskData> {
    let washout = cfg.washout();
    match cfg.task {
        TaskName::Pianomidi => {
            let path = cfg
                .data
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("data.path is required".into()))?;
            let d = load_pianoroll(path)?;
            let split = |s: Split| {
                let all = d.next_step_sequences(s);
                let n = all.len();
                let kept: Vec<Sequence> = all
                    .into_iter()
                    .filter(|q| q.inputs.nrows() > washout)
                    .collect();
                if kept.len() < n {
                    log::warn!(
                        "{s}: dropped {} sequences not longer than the washout",
                        n - kept.len()
                    );
                }
                TaskSplit {
                    sequences: kept,
                    washout,
                }
            };
            TaskData::new(
                cfg.task,
                split(Split::Train),
                split(Split::Val),
                split(Split::Test),
            )
        }
        _ => {
            let horizon = cfg.data.horizon.unwrap_or(match cfg.task {
                TaskName::Mackey => 84,
                _ => 1,
            });
            let sizes = match (cfg.data.splits, cfg.task) {
                (Some(s), _) => (s[0], s[1], s[2]),
                (None, TaskName::Mackey) => (6400, 1600, 2000),
                (None, TaskName::Melbourne) => (2336, 584, 730),
                (None, _) => return Err(Error::Config("data.splits is required".into())),
            };
            let mut series = match cfg.task {
                TaskName::Mackey => cfg
                    .data
                    .mackey
                    .generate(sizes.0 + sizes.1 + sizes.2 + horizon)?,
                _ => {
                    let path = cfg
                        .data
                        .path
                        .as_ref()
                        .ok_or_else(|| Error::Config("data.path is required".into()))?;
                    load_csv_series(path)?
                }
            };
            let smoothing = cfg
                .data
                .smoothing
                .or((cfg.task == TaskName::Melbourne).then_some(5));
            if let Some(w) = smoothing {
                series = moving_average(&series, w)?;
            }
            let available = series.len().saturating_sub(horizon);
            let fitted = fit_split_sizes(sizes, available);
            if fitted != sizes {
                log::warn!(
                    "split {sizes:?} exceeds the {available} available pairs; truncated proportionally to {fitted:?}"
                );
            }
            if cfg.data.min_max {
                let train_span = (fitted.0 + horizon).min(series.len());
                let col = DMatrix::from_column_slice(train_span, 1, &series[..train_span]);
                let scaler = MinMaxScaler::fit(&col)?;
                let all = DMatrix::from_column_slice(series.len(), 1, &series);
                series = scaler.transform(&all)?.as_slice().to_vec();
            }
            let pairs = make_forecast_dataset(&series, horizon)?;
            let [tr, va, te] = split_series(&pairs, fitted, washout)?;
            TaskData::new(
                cfg.task,
                TaskSplit::from_dataset(tr),
                TaskSplit::from_dataset(va),
                TaskSplit::from_dataset(te),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mackey_defaults() {
        let cfg =
            ExperimentConfig::from_toml("task = \"mackey\"\n[topology]\nbreadth = 1\ndepth = 1\n")
                .unwrap();
        let t = load_task(&cfg).unwrap();
        assert_eq!(t.train.sequences[0].inputs.nrows(), 6400);
        assert_eq!(t.train.washout, 100);
        assert_eq!(t.val.sequences[0].inputs.nrows(), 1700);
        assert_eq!(t.val.washout, 100);
        assert_eq!(t.test_accesses(), 0);
        let test = t.test();
        assert_eq!(test.sequences[0].inputs.nrows(), 2100);
        // the last test target is the last generated sample
        let last_target = test.sequences[0].targets[(2099, 0)];
        let series = cfg.data.mackey.generate(10_084).unwrap();
        assert_eq!(last_target, series[10_083]);
        assert_eq!(t.test_accesses(), 1);
    }

    #[test]
    fn melbourne_truncates_proportionally() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("temps.csv");
        let mut text = String::from("date,temp\n");
        for i in 0..3650 {
            text.push_str(&format!(
                "d{i},{}\n",
                10.0 + (i as f64 * 0.0172).sin() * 5.0
            ));
        }
        std::fs::write(&path, text).unwrap();
        let cfg = ExperimentConfig::from_toml(&format!(
            "task = \"melbourne\"\n[data]\npath = {:?}\n[topology]\nbreadth = 1\ndepth = 1\n",
            path
        ))
        .unwrap();
        let t = load_task(&cfg).unwrap();
        let tr = t.train.sequences[0].inputs.nrows();
        let va = t.val.sequences[0].inputs.nrows() - t.val.washout;
        let te = t.test().sequences[0].inputs.nrows() - 30;
        assert_eq!(tr + va + te, 3650 - 4 - 1);
    }
}
