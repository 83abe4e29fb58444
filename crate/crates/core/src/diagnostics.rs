//! Reservoir goodness: separation-ratio analysis and the input-driven local
//! maximum Lyapunov exponent.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{drive, spectral::eigenvalue_moduli, ReservoirWeights, TopologyGrid};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationPoint {
    pub input_sep: f64,
    pub output_sep: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationSample {
    pub points: Vec<SeparationPoint>,
    /// Pairs dropped because their inputs coincide.
    pub skipped: usize,
}

/// Default cap on sampled pairs.
pub const DEFAULT_MAX_PAIRS: usize = 10_000;

/// Distances between input pairs and between the corresponding outputs.
///
/// Up to `max_pairs` unordered pairs are drawn uniformly without replacement
/// (every pair when there are fewer).
pub fn separation_points(
    inputs: &[DVector<f64>],
    outputs: &[DVector<f64>],
    max_pairs: usize,
    seed: u64,
) -> Result<SeparationSample> {
    let n = inputs.len();
    if n != outputs.len() {
        return Err(Error::dim("separation outputs", n, outputs.len()));
    }
    if n < 2 {
        return Err(Error::Diagnostics(
            "separation needs at least two vectors".into(),
        ));
    }
    let total = n * (n - 1) / 2;
    let picks: Vec<usize> = if total <= max_pairs {
        (0..total).collect()
    } else {
        let mut rng = substream(seed, "separation/pairs");
        let mut v = index::sample(&mut rng, total, max_pairs).into_vec();
        v.sort_unstable();
        v
    };
    let mut points = Vec::with_capacity(picks.len());
    let mut skipped = 0;
    for k in picks {
        let (i, j) = unrank_pair(k, n);
        let input_sep = (&inputs[i] - &inputs[j]).norm();
        if input_sep == 0.0 {
            skipped += 1;
            continue;
        }
        points.push(SeparationPoint {
            input_sep,
            output_sep: (&outputs[i] - &outputs[j]).norm(),
        });
    }
    if points.is_empty() {
        return Err(Error::Diagnostics(format!(
            "all {skipped} sampled pairs have zero input separation"
        )));
    }
    Ok(SeparationSample { points, skipped })
}

/// Maps `k` in 0..n(n-1)/2 to the k-th pair (i, j), i < j, in row order.
fn unrank_pair(k: usize, n: usize) -> (usize, usize) {
    // row i holds n-1-i pairs; walk rows from the closed form then correct
    let kf = k as f64;
    let nf = n as f64;
    let mut i = (nf - 0.5 - ((nf - 0.5).powi(2) - 2.0 * kf).max(0.0).sqrt()).floor() as usize;
    let start = |i: usize| i * (2 * n - i - 1) / 2;
    while i > 0 && start(i) > k {
        i -= 1;
    }
    while start(i + 1) <= k {
        i += 1;
    }
    (i, i + 1 + (k - start(i)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationZone {
    Chaotic,
    Balanced,
    Attractor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationFit {
    pub slope: f64,
    pub intercept: f64,
    pub count: usize,
}

/// Slope tolerance around 1 used by [`SeparationFit::zone`].
pub const ZONE_TOLERANCE: f64 = 0.1;

impl SeparationFit {
    pub fn zone(&self) -> SeparationZone {
        if self.slope > 1.0 + ZONE_TOLERANCE {
            SeparationZone::Chaotic
        } else if self.slope < 1.0 - ZONE_TOLERANCE {
            SeparationZone::Attractor
        } else {
            SeparationZone::Balanced
        }
    }
}

/// Ordinary least squares of output separation on input separation.
pub fn separation_fit(points: &[SeparationPoint]) -> Result<SeparationFit> {
    if points.len() < 2 {
        return Err(Error::Diagnostics(
            "separation fit needs at least two points".into(),
        ));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.input_sep).sum::<f64>() / n;
    let my = points.iter().map(|p| p.output_sep).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in points {
        sxy += (p.input_sep - mx) * (p.output_sep - my);
        sxx += (p.input_sep - mx).powi(2);
    }
    if sxx == 0.0 {
        return Err(Error::Diagnostics(
            "all input separations are identical; the fit is vertical".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(SeparationFit {
        slope,
        intercept: my - slope * mx,
        count: points.len(),
    })
}

/// Which vectors a separation analysis compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SeparationView {
    /// Network input against the concatenated reservoir states.
    #[default]
    Network,
    /// Input vector of reservoir `from` against the state of reservoir `to`.
    Layers { from: usize, to: usize },
}

/// Collects matched (input, output) vectors along a driven trajectory and
/// samples separation points from them.
pub fn separation_from_run(
    topology: &TopologyGrid,
    weights: &ReservoirWeights,
    leak: f64,
    sequences: &[DMatrix<f64>],
    washout: usize,
    view: SeparationView,
    max_pairs: usize,
    seed: u64,
) -> Result<SeparationSample> {
    if let SeparationView::Layers { from, to } = view {
        let n = topology.n_reservoirs();
        if from >= n || to >= n {
            return Err(Error::Diagnostics(format!(
                "layer view ({from}, {to}) outside {n} reservoirs"
            )));
        }
    }
    let mut ins = Vec::new();
    let mut outs = Vec::new();
    for seq in sequences {
        drive(topology, weights, leak, seq, None, |step| {
            if step.t < washout {
                return;
            }
            match view {
                SeparationView::Network => {
                    ins.push(step.input.clone());
                    let width: usize = step.states.iter().map(|s| s.len()).sum();
                    let mut v = DVector::zeros(width);
                    let mut off = 0;
                    for s in step.states {
                        v.rows_mut(off, s.len()).copy_from(s);
                        off += s.len();
                    }
                    outs.push(v);
                }
                SeparationView::Layers { from, to } => {
                    let mut parts: Vec<&DVector<f64>> = Vec::new();
                    for src in topology.sources(from) {
                        match *src {
                            crate::reservoir::Source::Input => parts.push(step.input),
                            crate::reservoir::Source::Reservoir(k) => parts.push(&step.states[k]),
                        }
                    }
                    let width = parts.iter().map(|p| p.len()).sum();
                    let mut v = DVector::zeros(width);
                    let mut off = 0;
                    for p in parts {
                        v.rows_mut(off, p.len()).copy_from(p);
                        off += p.len();
                    }
                    ins.push(v);
                    outs.push(step.states[to].clone());
                }
            }
        })?;
    }
    separation_points(&ins, &outs, max_pairs, seed)
}

/// Result of a local Lyapunov estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda_max: f64,
    /// Mean log modulus per reservoir and eigenvalue rank (descending modulus).
    pub per_layer: Vec<Vec<f64>>,
    /// Timesteps averaged over.
    pub steps: usize,
    /// True when some eigenvalue modulus was clamped before taking the log.
    pub clamped: bool,
}

const MODULUS_FLOOR: f64 = 1e-12;

/// Local maximum Lyapunov exponent of the input-driven network.
///
/// At every post-washout timestep and for every reservoir, the eigenvalue
/// moduli of `(1 - a) I + a D W^` are computed, where `D = diag(1 - x~^2)`
/// and `W^` is the recurrent matrix. Eigenvalues are ranked by descending
/// modulus; log moduli are averaged per (reservoir, rank) over all sequences
/// and timesteps, and the maximum average is returned.
pub fn local_mle(
    topology: &TopologyGrid,
    weights: &ReservoirWeights,
    leak: f64,
    sequences: &[DMatrix<f64>],
    washout: usize,
) -> Result<LyapunovEstimate> {
    local_mle_strided(topology, weights, leak, sequences, washout, 1)
}

/// As [`local_mle`], sampling every `stride`-th post-washout timestep.
pub fn local_mle_strided(
    topology: &TopologyGrid,
    weights: &ReservoirWeights,
    leak: f64,
    sequences: &[DMatrix<f64>],
    washout: usize,
    stride: usize,
) -> Result<LyapunovEstimate> {
    let stride = stride.max(1);
    let n = weights.neurons;
    let n_l = weights.n_reservoirs();
    let mut sums = vec![vec![0.0; n]; n_l];
    let mut steps = 0usize;
    let mut clamped = false;
    let mut failure = None;
    let identity = DMatrix::<f64>::identity(n, n) * (1.0 - leak);
    for seq in sequences {
        drive(topology, weights, leak, seq, None, |step| {
            if failure.is_some() || step.t < washout || (step.t - washout) % stride != 0 {
                return;
            }
            for (l, layer) in weights.layers.iter().enumerate() {
                let d = step.pre_activations[l].map(|x| 1.0 - x * x);
                // (1 - a) I + a D W^, with D scaling rows of W^
                let mut j = layer.recurrent.clone();
                for (r, dr) in d.iter().enumerate() {
                    j.row_mut(r).scale_mut(leak * dr);
                }
                j += &identity;
                match eigenvalue_moduli(&j) {
                    Ok(moduli) => {
                        for (k, m) in moduli.iter().enumerate() {
                            if *m < MODULUS_FLOOR {
                                clamped = true;
                            }
                            sums[l][k] += m.max(MODULUS_FLOOR).ln();
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            }
            steps += 1;
        })?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    if steps == 0 {
        return Err(Error::Diagnostics(
            "no timesteps left after washout for the Lyapunov estimate".into(),
        ));
    }
    let per_layer: Vec<Vec<f64>> = sums
        .into_iter()
        .map(|row| row.into_iter().map(|s| s / steps as f64).collect())
        .collect();
    let lambda_max = per_layer
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LyapunovEstimate {
        lambda_max,
        per_layer,
        steps,
        clamped,
    })
}
