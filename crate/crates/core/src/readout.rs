//! State harvesting and the ridge-regression readout.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Direction;
use crate::reservoir::{drive, ReservoirWeights, TopologyGrid};
use crate::serde_matrix;

/// One input/target sequence, one row per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

/// Regression design matrix with washout rows removed.
#[derive(Debug, Clone)]
pub struct StateMatrix {
    pub x: DMatrix<f64>,
    /// (sequence index, timestep) of every row.
    pub provenance: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutWeights {
    #[serde(with = "serde_matrix")]
    pub w_out: DMatrix<f64>,
    pub beta: f64,
}

/// Runs every sequence from the zero state and stacks the concatenated
/// states, dropping the first `washout` timesteps of each sequence. Returns
/// the design matrix and the row-aligned targets.
pub fn harvest_states(
    weights: &ReservoirWeights,
    topology: &TopologyGrid,
    leak: f64,
    sequences: &[Sequence],
    washout: usize,
) -> Result<(StateMatrix, DMatrix<f64>)> {
    let width = weights.state_width();
    let n_y = sequences.first().map_or(0, |s| s.targets.ncols());
    let mut rows = 0;
    for (i, s) in sequences.iter().enumerate() {
        if s.inputs.nrows() != s.targets.nrows() {
            return Err(Error::dim(
                "target rows",
                s.inputs.nrows(),
                s.targets.nrows(),
            ));
        }
        if s.targets.ncols() != n_y {
            return Err(Error::dim("target columns", n_y, s.targets.ncols()));
        }
        if s.inputs.nrows() <= washout {
            return Err(Error::Data(format!(
                "sequence {i} has {} timesteps, not more than the washout of {washout}",
                s.inputs.nrows()
            )));
        }
        rows += s.inputs.nrows() - washout;
    }
    // filled row-major then transposed, so each state is one contiguous write
    let mut xt = DMatrix::zeros(width, rows);
    let mut y = DMatrix::zeros(rows, n_y);
    let mut provenance = Vec::with_capacity(rows);
    let mut r = 0;
    for (i, s) in sequences.iter().enumerate() {
        drive(topology, weights, leak, &s.inputs, None, |step| {
            if step.t < washout {
                return;
            }
            let col = xt.column_mut(r);
            let out = col.data.into_slice_mut();
            out[..step.input.len()].copy_from_slice(step.input.as_slice());
            let mut off = step.input.len();
            for st in step.states {
                out[off..off + st.len()].copy_from_slice(st.as_slice());
                off += st.len();
            }
            y.row_mut(r).copy_from(&s.targets.row(step.t));
            provenance.push((i, step.t));
            r += 1;
        })?;
    }
    Ok((
        StateMatrix {
            x: xt.transpose(),
            provenance,
        },
        y,
    ))
}

/// W_out = (X^T X + beta I)^-1 X^T Y via Cholesky.
pub fn ridge_explicit(x: &DMatrix<f64>, y: &DMatrix<f64>, beta: f64) -> Result<ReadoutWeights> {
    check_beta(beta)?;
    if x.nrows() != y.nrows() {
        return Err(Error::dim("ridge target rows", x.nrows(), y.nrows()));
    }
    let mut gram = x.tr_mul(x);
    for i in 0..gram.nrows() {
        gram[(i, i)] += beta;
    }
    let rhs = x.tr_mul(y);
    let chol = nalgebra::linalg::Cholesky::new(gram).ok_or(Error::SingularSystem { beta })?;
    let w_out = chol.solve(&rhs);
    if w_out.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { beta });
    }
    Ok(ReadoutWeights { w_out, beta })
}

thread_local! {
    static FACTORIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of SVD factorizations computed on the current thread.
pub fn factorization_count() -> usize {
    FACTORIZATIONS.with(|c| c.get())
}

/// Thin SVD of a design matrix with the targets already projected onto the
/// left singular vectors; solving for any beta is then a cheap rescale.
#[derive(Debug, Clone)]
pub struct RidgeFactorization {
    v: DMatrix<f64>,
    singular_values: DVector<f64>,
    ut_y: DMatrix<f64>,
    cutoff: f64,
}

impl RidgeFactorization {
    pub fn new(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::dim("ridge target rows", x.nrows(), y.nrows()));
        }
        FACTORIZATIONS.with(|c| c.set(c.get() + 1));
        let (m, n) = x.shape();
        let (u_t_y, singular_values, v) = if m > n {
            // X = Q R, R = U_r S V^T  =>  U^T Y = U_r^T (Q^T Y)
            let qr = x.clone().qr();
            let mut qty = y.clone();
            qr.q_tr_mul(&mut qty);
            let qty = qty.rows(0, n).into_owned();
            let svd = qr.unpack_r().svd(true, true);
            let u = svd.u.expect("requested U");
            let v_t = svd.v_t.expect("requested V^T");
            (u.tr_mul(&qty), svd.singular_values, v_t.transpose())
        } else {
            let svd = x.clone().svd(true, true);
            let u = svd.u.expect("requested U");
            let v_t = svd.v_t.expect("requested V^T");
            (u.tr_mul(y), svd.singular_values, v_t.transpose())
        };
        let smax = singular_values.iter().copied().fold(0.0, f64::max);
        let cutoff = smax * f64::EPSILON * m.max(n) as f64;
        Ok(RidgeFactorization {
            v,
            singular_values,
            ut_y: u_t_y,
            cutoff,
        })
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// W_out = V diag(s / (s^2 + beta)) U^T Y. Singular values at or below
    /// the numerical rank cutoff contribute nothing when beta is 0.
    pub fn solve(&self, beta: f64) -> Result<ReadoutWeights> {
        check_beta(beta)?;
        let filt = self.singular_values.map(|s| {
            if beta == 0.0 && s <= self.cutoff {
                0.0
            } else {
                s / (s * s + beta)
            }
        });
        let mut scaled = self.ut_y.clone();
        for (i, f) in filt.iter().enumerate() {
            scaled.row_mut(i).scale_mut(*f);
        }
        Ok(ReadoutWeights {
            w_out: &self.v * scaled,
            beta,
        })
    }
}

/// Ridge regression through the singular value decomposition of X; always
/// defined, and the minimum-norm least-squares solution at beta = 0.
pub fn ridge_svd(x: &DMatrix<f64>, y: &DMatrix<f64>, beta: f64) -> Result<ReadoutWeights> {
    RidgeFactorization::new(x, y)?.solve(beta)
}

pub fn predict(x: &DMatrix<f64>, w_out: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != w_out.nrows() {
        return Err(Error::dim("readout input width", w_out.nrows(), x.ncols()));
    }
    Ok(x * w_out)
}

/// Outcome of choosing beta on validation data.
#[derive(Debug, Clone)]
pub struct BetaChoice {
    pub beta: f64,
    pub readout: ReadoutWeights,
    pub score: f64,
    /// (beta, validation score) for every candidate, in candidate order.
    pub scores: Vec<(f64, f64)>,
}

/// Fits the readout for every candidate beta from one shared factorization of
/// `x_train` and keeps the best validation score. Ties go to the smallest
/// beta; candidates whose score is undefined are skipped.
pub fn beta_sweep<S>(
    x_train: &DMatrix<f64>,
    y_train: &DMatrix<f64>,
    x_val: &DMatrix<f64>,
    y_val: &DMatrix<f64>,
    candidates: &[f64],
    direction: Direction,
    score: S,
) -> Result<BetaChoice>
where
    S: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(Error::HyperParameters("beta candidate set is empty".into()));
    }
    let fact = RidgeFactorization::new(x_train, y_train)?;
    beta_sweep_factored(&fact, x_val, y_val, candidates, direction, score)
}

pub fn beta_sweep_factored<S>(
    fact: &RidgeFactorization,
    x_val: &DMatrix<f64>,
    y_val: &DMatrix<f64>,
    candidates: &[f64],
    direction: Direction,
    score: S,
) -> Result<BetaChoice>
where
    S: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<f64>,
{
    let mut sorted: Vec<f64> = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, ReadoutWeights, f64)> = None;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut last_err = None;
    for &beta in &sorted {
        let readout = fact.solve(beta)?;
        let pred = predict(x_val, &readout.w_out)?;
        let s = match score(y_val, &pred) {
            Ok(s) if s.is_finite() => s,
            Ok(_) => {
                scores.push((beta, f64::NAN));
                continue;
            }
            Err(e) => {
                scores.push((beta, f64::NAN));
                last_err = Some(e);
                continue;
            }
        };
        scores.push((beta, s));
        let better = match &best {
            None => true,
            Some((_, _, b)) => direction.is_better(s, *b),
        };
        if better {
            best = Some((beta, readout, s));
        }
    }
    let (beta, readout, score) = match best {
        Some(b) => b,
        None => {
            return Err(last_err.unwrap_or_else(|| {
                Error::Metric("no beta candidate produced a finite validation score".into())
            }))
        }
    };
    // report in the caller's candidate order
    let mut ordered = Vec::with_capacity(candidates.len());
    for c in candidates {
        if let Some(p) = scores.iter().find(|(b, _)| b.to_bits() == c.to_bits()) {
            ordered.push(*p);
        }
    }
    Ok(BetaChoice {
        beta,
        readout,
        score,
        scores: ordered,
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(Error::HyperParameters(format!(
            "ridge beta must be finite and nonnegative, got {beta}"
        )))
    }
}
