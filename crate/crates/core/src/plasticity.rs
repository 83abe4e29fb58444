//! Intrinsic plasticity: unsupervised adaptation of per-neuron gain and bias
//! toward a Gaussian activation distribution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::reservoir::{advance_layer, ReservoirWeights, TopologyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpConfig {
    /// Learning rate.
    pub eta: f64,
    /// Target mean.
    pub mu: f64,
    /// Target standard deviation.
    pub sigma: f64,
    /// Passes over the training sequences per layer; 0 disables IP.
    pub epochs: usize,
}

impl Default for IpConfig {
    fn default() -> Self {
        IpConfig {
            eta: 5e-4,
            mu: 0.0,
            sigma: 0.1,
            epochs: 3,
        }
    }
}

impl IpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::HyperParameters(format!(
                "IP target sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::HyperParameters(format!(
                "IP learning rate must be nonnegative, got {}",
                self.eta
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::HyperParameters(
                "IP target mean must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Bias and gain increments for one neuron.
///
/// `pre` is the activation before leak mixing, `state` the mixed state.
pub fn ip_update(pre: f64, state: f64, gain: f64, cfg: &IpConfig) -> Result<(f64, f64)> {
    if gain == 0.0 {
        return Err(Error::Plasticity(
            "gain is zero; the gain update divides by it".into(),
        ));
    }
    let s2 = cfg.sigma * cfg.sigma;
    let db = -(cfg.eta / s2) * (-cfg.mu + pre * (2.0 * s2 + 1.0 - pre * pre + cfg.mu * pre));
    let dg = cfg.eta / gain + db * state;
    Ok((db, dg))
}

/// Layer-wise IP pre-training.
///
/// Reservoirs are adapted one at a time in evolution order; while reservoir
/// `l` adapts, every reservoir before it runs with its already adapted (and
/// now frozen) gain and bias. Updates are applied online at every timestep
/// past `washout` of each sequence; state resets to zero per sequence.
pub fn ip_pretrain(
    weights: &ReservoirWeights,
    sequences: &[DMatrix<f64>],
    topology: &TopologyGrid,
    leak: f64,
    cfg: &IpConfig,
    washout: usize,
) -> Result<ReservoirWeights> {
    ip_pretrain_observed(weights, sequences, topology, leak, cfg, washout, |_, _| {})
}

/// As [`ip_pretrain`], calling `on_layer(l, weights)` right before reservoir
/// `l` starts adapting.
pub fn ip_pretrain_observed<F>(
    weights: &ReservoirWeights,
    sequences: &[DMatrix<f64>],
    topology: &TopologyGrid,
    leak: f64,
    cfg: &IpConfig,
    washout: usize,
    mut on_layer: F,
) -> Result<ReservoirWeights>
where
    F: FnMut(usize, &ReservoirWeights),
{
    cfg.validate()?;
    weights.check_shapes(topology)?;
    let mut w = weights.clone();
    if cfg.epochs == 0 || cfg.eta == 0.0 {
        return Ok(w);
    }
    for seq in sequences {
        if seq.ncols() != w.n_inputs {
            return Err(Error::dim(
                "IP training sequence columns",
                w.n_inputs,
                seq.ncols(),
            ));
        }
    }
    let n = w.neurons;
    let order = topology.order().to_vec();
    for (pos, &target) in order.iter().enumerate() {
        on_layer(target, &w);
        let active = &order[..=pos];
        for _ in 0..cfg.epochs {
            for seq in sequences {
                let mut states = vec![DVector::zeros(n); w.n_reservoirs()];
                for t in 0..seq.nrows() {
                    let u = seq.row(t).transpose();
                    for &l in active {
                        let out = advance_layer(topology, &w, l, &u, &states, &states[l], leak);
                        if l == target && t >= washout {
                            let layer = &mut w.layers[l];
                            for i in 0..n {
                                let (db, dg) = ip_update(
                                    out.pre_activation[i],
                                    out.state[i],
                                    layer.gain[i],
                                    cfg,
                                )?;
                                layer.bias[i] += db;
                                layer.gain[i] += dg;
                            }
                        }
                        states[l] = out.state;
                    }
                }
            }
        }
        let layer = &w.layers[target];
        if layer
            .gain
            .iter()
            .chain(layer.bias.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Plasticity(format!(
                "reservoir {target} gain/bias diverged; lower the learning rate"
            )));
        }
    }
    Ok(w)
}

const KL_BINS: usize = 64;

/// KL divergence of the empirical distribution of `samples` from
/// N(mu, sigma^2) restricted and renormalized to [-1, 1], estimated on a
/// 64-bin histogram over [-1, 1]. Samples outside the range fall in the edge
/// bins.
pub fn kl_estimate(samples: &[f64], mu: f64, sigma: f64) -> Result<f64> {
    if samples.len() < 100 {
        return Err(Error::Plasticity(format!(
            "KL estimate needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    let normal = Normal::new(mu, sigma)
        .map_err(|e| Error::Plasticity(format!("invalid target distribution: {e}")))?;
    let width = 2.0 / KL_BINS as f64;
    let mut counts = [0usize; KL_BINS];
    for &s in samples {
        if !s.is_finite() {
            return Err(Error::Plasticity("non-finite activation sample".into()));
        }
        let idx = (((s + 1.0) / width).floor() as isize).clamp(0, KL_BINS as isize - 1);
        counts[idx as usize] += 1;
    }
    let total_mass = normal.cdf(1.0) - normal.cdf(-1.0);
    let n = samples.len() as f64;
    let mut kl = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let lo = -1.0 + i as f64 * width;
        let q = ((normal.cdf(lo + width) - normal.cdf(lo)) / total_mass).max(f64::MIN_POSITIVE);
        let p = c as f64 / n;
        kl += p * (p / q).ln();
    }
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::Distribution;

    #[test]
    fn update_vanishes_at_target_mean() {
        let cfg = IpConfig {
            eta: 0.01,
            mu: 0.0,
            sigma: 0.3,
            epochs: 1,
        };
        let (db, dg) = ip_update(0.0, 0.7, 1.0, &cfg).unwrap();
        assert_eq!(db, 0.0);
        assert_abs_diff_eq!(dg, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn update_hand_arithmetic() {
        let cfg = IpConfig {
            eta: 0.01,
            mu: 0.0,
            sigma: 1.0,
            epochs: 1,
        };
        let (db, dg) = ip_update(0.5, 0.4, 1.0, &cfg).unwrap();
        assert_abs_diff_eq!(db, -0.01375, epsilon = 1e-15);
        assert_abs_diff_eq!(dg, 0.0045, epsilon = 1e-15);
    }

    #[test]
    fn zero_rate_and_zero_gain() {
        let cfg = IpConfig {
            eta: 0.0,
            ..Default::default()
        };
        assert_eq!(ip_update(0.3, 0.2, 1.5, &cfg).unwrap(), (0.0, 0.0));
        assert!(ip_update(0.3, 0.2, 0.0, &IpConfig::default()).is_err());
    }

    #[test]
    fn kl_of_matching_truncated_gaussian_is_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let normal = rand_distr::Normal::new(0.0, 0.25).unwrap();
        let samples: Vec<f64> = std::iter::repeat_with(|| normal.sample(&mut rng))
            .filter(|v: &f64| v.abs() <= 1.0)
            .take(50_000)
            .collect();
        let kl = kl_estimate(&samples, 0.0, 0.25).unwrap();
        assert!(kl < 0.05, "kl={kl}");
    }

    #[test]
    fn kl_of_constant_sample_is_single_bin() {
        let samples = vec![0.0; 500];
        let kl = kl_estimate(&samples, 0.0, 1.0).unwrap();
        let n = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        let mass = (n.cdf(1.0 / 32.0) - n.cdf(0.0)) / (n.cdf(1.0) - n.cdf(-1.0));
        assert_abs_diff_eq!(kl, -mass.ln(), epsilon = 1e-12);
        assert!(kl.is_finite());
    }

    #[test]
    fn kl_requires_enough_samples() {
        assert!(kl_estimate(&[0.1; 99], 0.0, 0.1).is_err());
    }
}
