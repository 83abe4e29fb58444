//! Forecast error metrics, frame-level accuracy and output thresholding.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which way a score improves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Strict improvement, so earlier candidates win ties.
    pub fn is_better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Direction::Minimize => candidate < incumbent,
            Direction::Maximize => candidate > incumbent,
        }
    }
}

fn check_shapes(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> Result<()> {
    if y.shape() != y_hat.shape() {
        return Err(Error::Metric(format!(
            "shape mismatch: truth {:?} vs prediction {:?}",
            y.shape(),
            y_hat.shape()
        )));
    }
    if y.is_empty() {
        return Err(Error::Metric("no values to score".into()));
    }
    Ok(())
}

fn squared_error(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> f64 {
    y.iter()
        .zip(y_hat.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum()
}

pub fn rmse(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> Result<f64> {
    check_shapes(y, y_hat)?;
    Ok((squared_error(y, y_hat) / y.len() as f64).sqrt())
}

/// RMSE normalized by the spread of the truth around its mean over all
/// evaluated timesteps (taken per output column).
pub fn nrmse(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> Result<f64> {
    check_shapes(y, y_hat)?;
    let mut denom = 0.0;
    for col in y.column_iter() {
        let mean = col.mean();
        denom += col.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    if denom == 0.0 {
        return Err(Error::Metric(
            "NRMSE undefined for constant ground truth".into(),
        ));
    }
    Ok((squared_error(y, y_hat) / denom).sqrt())
}

/// Mean absolute percentage error in percent, dividing by the signed truth.
pub fn mape(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> Result<f64> {
    check_shapes(y, y_hat)?;
    if y.iter().any(|v| *v == 0.0) {
        return Err(Error::Metric(
            "MAPE undefined when the truth contains zeros".into(),
        ));
    }
    let sum: f64 = y
        .iter()
        .zip(y_hat.iter())
        .map(|(a, b)| (a - b).abs() / a)
        .sum();
    Ok(100.0 * sum / y.len() as f64)
}

fn check_binary(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| *v == 0.0 || *v == 1.0) {
        Ok(())
    } else {
        Err(Error::Metric(format!("{what} is not binary")))
    }
}

/// TP / (TP + FP + FN) over every entry; 1 when nothing is active in either.
pub fn fl_acc(y_bin: &DMatrix<f64>, y_hat_bin: &DMatrix<f64>) -> Result<f64> {
    check_shapes(y_bin, y_hat_bin)?;
    check_binary(y_bin, "ground truth")?;
    check_binary(y_hat_bin, "prediction")?;
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (t, p) in y_bin.iter().zip(y_hat_bin.iter()) {
        match (*t == 1.0, *p == 1.0) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            (false, false) => {}
        }
    }
    let denom = tp + fp + fneg;
    Ok(if denom == 0 {
        1.0
    } else {
        tp as f64 / denom as f64
    })
}

/// Entries at or above `theta` become 1.
pub fn binarize(raw: &DMatrix<f64>, theta: f64) -> DMatrix<f64> {
    raw.map(|v| if v >= theta { 1.0 } else { 0.0 })
}

pub const THRESHOLD_CANDIDATES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub theta: f64,
    pub fl_acc: f64,
    pub candidates_evaluated: usize,
}

/// Sweeps 20 evenly spaced thresholds from min to max of the raw outputs and
/// keeps the one with the best frame-level accuracy (smallest on ties).
pub fn find_threshold(y_raw: &DMatrix<f64>, y_bin: &DMatrix<f64>) -> Result<ThresholdChoice> {
    check_shapes(y_bin, y_raw)?;
    check_binary(y_bin, "ground truth")?;
    let lo = y_raw.min();
    let hi = y_raw.max();
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Metric(
            "raw predictions contain non-finite values".into(),
        ));
    }
    let candidates: Vec<f64> = if lo == hi {
        vec![lo]
    } else {
        (0..THRESHOLD_CANDIDATES)
            .map(|i| lo + (hi - lo) * i as f64 / (THRESHOLD_CANDIDATES - 1) as f64)
            .collect()
    };
    let mut best = ThresholdChoice {
        theta: f64::NAN,
        fl_acc: f64::NEG_INFINITY,
        candidates_evaluated: 0,
    };
    for &theta in &candidates {
        let acc = fl_acc(y_bin, &binarize(y_raw, theta))?;
        best.candidates_evaluated += 1;
        if acc > best.fl_acc {
            best.theta = theta;
            best.fl_acc = acc;
        }
    }
    Ok(best)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Metric(format!(
            "pearson needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Metric("pearson needs at least two points".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Metric(
            "pearson undefined for a constant input".into(),
        ));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Scores of one trained network on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub nrmse: Option<f64>,
    /// MAPE in percent.
    pub mape_percent: Option<f64>,
    /// MAPE as a plain fraction (percent / 100).
    pub mape_fraction: Option<f64>,
    pub fl_acc: Option<f64>,
    pub threshold: Option<f64>,
    pub lambda_max: Option<f64>,
}

impl MetricReport {
    /// Regression report; metrics that are undefined for this data are left
    /// empty instead of failing the whole evaluation.
    pub fn regression(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> Result<Self> {
        let rmse = rmse(y, y_hat)?;
        let mape_percent = mape(y, y_hat).ok();
        Ok(MetricReport {
            rmse,
            nrmse: nrmse(y, y_hat).ok(),
            mape_percent,
            mape_fraction: mape_percent.map(|p| p / 100.0),
            fl_acc: None,
            threshold: None,
            lambda_max: None,
        })
    }

    /// Binary-output report at a fixed threshold.
    pub fn binary(y_bin: &DMatrix<f64>, y_raw: &DMatrix<f64>, theta: f64) -> Result<Self> {
        let acc = fl_acc(y_bin, &binarize(y_raw, theta))?;
        Ok(MetricReport {
            rmse: rmse(y_bin, y_raw)?,
            nrmse: nrmse(y_bin, y_raw).ok(),
            mape_percent: None,
            mape_fraction: None,
            fl_acc: Some(acc),
            threshold: Some(theta),
            lambda_max: None,
        })
    }

    pub const CSV_HEADER: [&'static str; 7] = [
        "rmse",
        "nrmse",
        "mape_percent",
        "mape_fraction",
        "fl_acc",
        "threshold",
        "lambda_max",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.rmse.to_string(),
            opt(self.nrmse),
            opt(self.mape_percent),
            opt(self.mape_fraction),
            opt(self.fl_acc),
            opt(self.threshold),
            opt(self.lambda_max),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn perfect_prediction() {
        let y = col(&[1.0, 2.0, 5.0]);
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        assert_eq!(nrmse(&y, &y).unwrap(), 0.0);
        assert_eq!(mape(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn hand_arithmetic() {
        let y = col(&[1.0, 2.0, 3.0]);
        let p = col(&[1.0, 2.0, 4.0]);
        assert_abs_diff_eq!(
            rmse(&y, &p).unwrap(),
            (1.0f64 / 3.0).sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(nrmse(&y, &p).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(mape(&y, &p).unwrap(), 100.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn undefined_cases() {
        let c = col(&[2.0, 2.0, 2.0]);
        assert!(nrmse(&c, &col(&[1.0, 2.0, 3.0])).is_err());
        assert!(mape(&col(&[0.0, 1.0]), &col(&[0.0, 1.0])).is_err());
        assert!(rmse(&c, &col(&[1.0])).is_err());
    }

    #[test]
    fn fl_acc_counts() {
        let y = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let p = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        // TP=2, FP=1, FN=1
        assert_abs_diff_eq!(fl_acc(&y, &p).unwrap(), 0.5);
        assert_eq!(fl_acc(&y, &y).unwrap(), 1.0);
        assert_eq!(fl_acc(&y, &DMatrix::zeros(2, 3)).unwrap(), 0.0);
        assert_eq!(
            fl_acc(&DMatrix::zeros(2, 2), &DMatrix::zeros(2, 2)).unwrap(),
            1.0
        );
        assert!(fl_acc(&y, &y.map(|v| v * 0.5)).is_err());
    }

    #[test]
    fn threshold_on_binary_predictions() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let t = find_threshold(&y, &y).unwrap();
        assert_eq!(t.candidates_evaluated, 20);
        assert_eq!(t.fl_acc, 1.0);
        assert_abs_diff_eq!(t.theta, 1.0 / 19.0, epsilon = 1e-15);
    }

    #[test]
    fn threshold_on_separable_scores() {
        let y = DMatrix::from_row_slice(1, 6, &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        let raw = DMatrix::from_row_slice(1, 6, &[0.1, 0.8, 0.3, 0.9, 0.75, -0.2]);
        let t = find_threshold(&raw, &y).unwrap();
        assert_eq!(t.fl_acc, 1.0);
        assert!(t.theta > 0.3 && t.theta <= 0.75);
    }

    #[test]
    fn threshold_constant_raw() {
        let y = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let t = find_threshold(&DMatrix::from_element(1, 2, 0.4), &y).unwrap();
        assert_eq!(t.candidates_evaluated, 1);
        assert_eq!(t.theta, 0.4);
    }

    #[test]
    fn pearson_cases() {
        let a = [1.0, 2.0, 3.0, 5.0];
        assert_abs_diff_eq!(pearson(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&a, &neg).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap(),
            0.9934,
            epsilon = 1e-4
        );
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }
}
