use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::Sequence;

/// Reads a `date,value` CSV with one header row and returns the values in
/// file order. Only the last field of each row is parsed.
pub fn load_csv_series(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    let mut lines = text.lines().enumerate();
    if lines.next().is_none() {
        return Err(Error::Data(format!("{} is empty", path.display())));
    }
    for (i, line) in lines {
        let line_no = i + 1;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            // a trailing newline at end of file is not a blank row
            if line_no == text.lines().count() {
                continue;
            }
            return Err(parse_err("blank line".into()));
        }
        let field = line
            .rsplit(',')
            .next()
            .unwrap_or(line)
            .trim()
            .trim_matches('"');
        let v: f64 = field
            .parse()
            .map_err(|_| parse_err(format!("cannot parse value {field:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(format!("non-finite value {field:?}")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Data(format!(
            "{} has a header but no rows",
            path.display()
        )));
    }
    Ok(values)
}

/// Writes a single-column CSV with a `value` header.
pub fn write_series_csv(path: impl AsRef<Path>, series: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut out =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "value")?;
        for v in series {
            writeln!(out, "{v}")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Trailing moving average: output[i] is the mean of series[i..i + window].
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window > series.len() {
        return Err(Error::Data(format!(
            "moving-average window {window} must lie in 1..={}",
            series.len()
        )));
    }
    Ok(series
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect())
}

/// Input/target pairs with y(t) = u(t + horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPairs {
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    pub horizon: usize,
}

impl ForecastPairs {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

pub fn make_forecast_dataset(series: &[f64], horizon: usize) -> Result<ForecastPairs> {
    if horizon == 0 {
        return Err(Error::Data("forecast horizon must be positive".into()));
    }
    if horizon >= series.len() {
        return Err(Error::Data(format!(
            "horizon {horizon} leaves no pairs in a series of length {}",
            series.len()
        )));
    }
    let n = series.len() - horizon;
    Ok(ForecastPairs {
        inputs: DMatrix::from_column_slice(n, 1, &series[..n]),
        targets: DMatrix::from_column_slice(n, 1, &series[horizon..]),
        horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// One split of a forecasting task. The first `washout` rows of every
/// sequence only warm the reservoir up and are never scored.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDataset {
    pub sequences: Vec<Sequence>,
    pub split: Split,
    pub washout: usize,
    pub horizon: usize,
}

impl SeriesDataset {
    /// Number of scored rows.
    pub fn scored_rows(&self) -> usize {
        self.sequences
            .iter()
            .map(|s| s.inputs.nrows().saturating_sub(self.washout))
            .sum()
    }

    pub fn inputs(&self) -> Vec<DMatrix<f64>> {
        self.sequences.iter().map(|s| s.inputs.clone()).collect()
    }
}

/// Shrinks `sizes` proportionally (largest remainder) so they fit into
/// `available` pairs. Sizes that already fit are returned unchanged.
pub fn fit_split_sizes(sizes: (usize, usize, usize), available: usize) -> (usize, usize, usize) {
    let total = sizes.0 + sizes.1 + sizes.2;
    if total <= available {
        return sizes;
    }
    let parts = [sizes.0, sizes.1, sizes.2];
    let mut out = [0usize; 3];
    let mut rems = [(0u128, 0usize); 3];
    for (k, &p) in parts.iter().enumerate() {
        let num = p as u128 * available as u128;
        out[k] = (num / total as u128) as usize;
        rems[k] = (num % total as u128, k);
    }
    let mut left = available - out.iter().sum::<usize>();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, k) in &rems {
        if left == 0 {
            break;
        }
        out[k] += 1;
        left -= 1;
    }
    (out[0], out[1], out[2])
}

/// Contiguous chronological split into train, validation and test.
///
/// Train washes out on its own first `washout` rows, so it scores
/// `train - washout` rows. Validation and test are prefixed by up to
/// `washout` immediately preceding pairs, so each scores exactly its size.
pub fn split_series(
    pairs: &ForecastPairs,
    sizes: (usize, usize, usize),
    washout: usize,
) -> Result<[SeriesDataset; 3]> {
    let (n_tr, n_va, n_te) = sizes;
    if n_tr + n_va + n_te > pairs.len() {
        return Err(Error::Data(format!(
            "split sizes ({n_tr}, {n_va}, {n_te}) exceed the {} available pairs",
            pairs.len()
        )));
    }
    if n_tr <= washout {
        return Err(Error::Data(format!(
            "training split of {n_tr} rows does not exceed the washout of {washout}"
        )));
    }
    if n_va == 0 || n_te == 0 {
        log::warn!("split ({n_tr}, {n_va}, {n_te}) leaves an empty validation or test set");
    }
    let take = |start: usize, len: usize| Sequence {
        inputs: pairs.inputs.rows(start, len).into_owned(),
        targets: pairs.targets.rows(start, len).into_owned(),
    };
    let train = SeriesDataset {
        sequences: vec![take(0, n_tr)],
        split: Split::Train,
        washout,
        horizon: pairs.horizon,
    };
    let prefixed = |start: usize, len: usize, split: Split| {
        if len == 0 {
            return SeriesDataset {
                sequences: Vec::new(),
                split,
                washout: 0,
                horizon: pairs.horizon,
            };
        }
        let prefix = washout.min(start);
        SeriesDataset {
            sequences: vec![take(start - prefix, len + prefix)],
            split,
            washout: prefix,
            horizon: pairs.horizon,
        }
    };
    Ok([
        train,
        prefixed(n_tr, n_va, Split::Val),
        prefixed(n_tr + n_va, n_te, Split::Test),
    ])
}

/// Per-column affine map of the training range onto [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::Data("cannot fit a scaler on zero rows".into()));
        }
        let min: Vec<f64> = data.column_iter().map(|c| c.min()).collect();
        let max: Vec<f64> = data.column_iter().map(|c| c.max()).collect();
        if min.iter().zip(&max).any(|(a, b)| a == b) {
            return Err(Error::Data("cannot min-max scale a constant column".into()));
        }
        Ok(MinMaxScaler { min, max })
    }

    pub fn transform(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.ncols() != self.min.len() {
            return Err(Error::dim("scaler columns", self.min.len(), data.ncols()));
        }
        Ok(DMatrix::from_fn(data.nrows(), data.ncols(), |r, c| {
            (data[(r, c)] - self.min[c]) / (self.max[c] - self.min[c])
        }))
    }

    pub fn inverse(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.ncols() != self.min.len() {
            return Err(Error::dim("scaler columns", self.min.len(), data.ncols()));
        }
        Ok(DMatrix::from_fn(data.nrows(), data.ncols(), |r, c| {
            data[(r, c)] * (self.max[c] - self.min[c]) + self.min[c]
        }))
    }
}
