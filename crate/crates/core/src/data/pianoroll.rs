use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::data::Split;
use crate::error::{Error, Result};
use crate::readout::Sequence;

pub const PITCH_LOW: u32 = 21;
pub const PITCH_HIGH: u32 = 108;
pub const NOTE_COLUMNS: usize = (PITCH_HIGH - PITCH_LOW + 1) as usize;

/// Binary piano rolls, one T x 88 matrix per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PianoRollDataset {
    pub train: Vec<DMatrix<f64>>,
    pub valid: Vec<DMatrix<f64>>,
    pub test: Vec<DMatrix<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Container {
    train: Vec<Vec<Vec<f64>>>,
    valid: Vec<Vec<Vec<f64>>>,
    test: Vec<Vec<Vec<f64>>>,
}

impl PianoRollDataset {
    pub fn split(&self, split: Split) -> &[DMatrix<f64>] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Next-step prediction pairs: inputs are frames 0..T-1, targets 1..T.
    /// Sequences shorter than two frames are dropped.
    pub fn next_step_sequences(&self, split: Split) -> Vec<Sequence> {
        self.split(split)
            .iter()
            .filter(|roll| roll.nrows() >= 2)
            .map(|roll| {
                let t = roll.nrows() - 1;
                Sequence {
                    inputs: roll.rows(0, t).into_owned(),
                    targets: roll.rows(1, t).into_owned(),
                }
            })
            .collect()
    }
}

/// Loads a JSON container `{"train": [...], "valid": [...], "test": [...]}`
/// where each split is a list of sequences and each sequence a list of
/// timesteps holding the active MIDI pitches (21..=108).
pub fn load_pianoroll(path: impl AsRef<Path>) -> Result<PianoRollDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let c: Container = serde_json::from_str(&text).map_err(|e| {
        Error::Data(format!(
            "{}: malformed piano-roll container: {e}",
            path.display()
        ))
    })?;
    let convert = |name: &str, seqs: Vec<Vec<Vec<f64>>>| -> Result<Vec<DMatrix<f64>>> {
        seqs.into_iter()
            .enumerate()
            .map(|(s, steps)| {
                roll_from_pitches(&steps)
                    .map_err(|e| Error::Data(format!("{name} sequence {s}: {e}")))
            })
            .collect()
    };
    Ok(PianoRollDataset {
        train: convert("train", c.train)?,
        valid: convert("valid", c.valid)?,
        test: convert("test", c.test)?,
    })
}

fn roll_from_pitches(steps: &[Vec<f64>]) -> std::result::Result<DMatrix<f64>, String> {
    let mut roll = DMatrix::zeros(steps.len(), NOTE_COLUMNS);
    for (t, pitches) in steps.iter().enumerate() {
        for &p in pitches {
            if p.fract() != 0.0 || p < PITCH_LOW as f64 || p > PITCH_HIGH as f64 {
                return Err(format!(
                    "timestep {t}: pitch {p} outside {PITCH_LOW}..={PITCH_HIGH}"
                ));
            }
            roll[(t, p as usize - PITCH_LOW as usize)] = 1.0;
        }
    }
    Ok(roll)
}
