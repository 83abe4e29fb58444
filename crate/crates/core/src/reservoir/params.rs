use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plasticity::IpConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Uniform U(-1, 1) entries rescaled to a target Frobenius norm.
    #[default]
    UniformNorm,
    /// N(0, 2 / (n_in + n_out)) entries, no rescaling.
    Glorot,
}

/// Ridge regularization strengths swept after the state matrix is built:
/// zero plus 10^-n for n in 1..=8.
pub fn default_beta_candidates() -> Vec<f64> {
    std::iter::once(0.0)
        .chain((1..=8).map(|n| 10f64.powi(-n)))
        .collect()
}

/// Every tunable scalar of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParameters {
    /// N_R, neurons per reservoir.
    pub neurons: usize,
    /// Target spectral radius of the leak-mixed recurrent map.
    pub spectral_radius: f64,
    /// Leak rate, shared by all reservoirs.
    pub leak: f64,
    /// Frobenius norm of the joint input matrix.
    pub input_norm: f64,
    /// Frobenius norm of each feedforward reservoir-to-reservoir matrix.
    pub feedforward_norm: f64,
    pub input_sparsity: f64,
    pub feedforward_sparsity: f64,
    pub recurrent_sparsity: f64,
    #[serde(default)]
    pub init_scheme: InitScheme,
    #[serde(default)]
    pub ip: IpConfig,
    #[serde(default = "default_beta_candidates")]
    pub beta_candidates: Vec<f64>,
}

impl Default for HyperParameters {
    fn default() -> Self {
        HyperParameters {
            neurons: 100,
            spectral_radius: 0.9,
            leak: 1.0,
            input_norm: 1.0,
            feedforward_norm: 1.0,
            input_sparsity: 0.0,
            feedforward_sparsity: 0.0,
            recurrent_sparsity: 0.9,
            init_scheme: InitScheme::UniformNorm,
            ip: IpConfig::default(),
            beta_candidates: default_beta_candidates(),
        }
    }
}

impl HyperParameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::HyperParameters(msg));
        if self.neurons == 0 {
            return bad("neurons per reservoir must be positive".into());
        }
        if !(self.spectral_radius.is_finite() && self.spectral_radius > 0.0) {
            return bad(format!(
                "spectral radius must be positive, got {}",
                self.spectral_radius
            ));
        }
        if !(self.leak > 0.0 && self.leak <= 1.0) {
            return bad(format!("leak must lie in (0, 1], got {}", self.leak));
        }
        for (name, v) in [
            ("input_norm", self.input_norm),
            ("feedforward_norm", self.feedforward_norm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("input_sparsity", self.input_sparsity),
            ("feedforward_sparsity", self.feedforward_sparsity),
            ("recurrent_sparsity", self.recurrent_sparsity),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if self.beta_candidates.is_empty() {
            return bad("beta candidate set is empty".into());
        }
        if let Some(b) = self
            .beta_candidates
            .iter()
            .find(|b| !(b.is_finite() && **b >= 0.0))
        {
            return bad(format!(
                "beta candidates must be finite and nonnegative, got {b}"
            ));
        }
        self.ip.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_betas() {
        let b = default_beta_candidates();
        assert_eq!(b.len(), 9);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[1], 0.1);
        assert!((b[8] - 1e-8).abs() < 1e-22);
    }

    #[test]
    fn validation() {
        let hp = HyperParameters::default();
        hp.validate().unwrap();
        for f in [
            |h: &mut HyperParameters| h.leak = 0.0,
            |h: &mut HyperParameters| h.leak = 1.5,
            |h: &mut HyperParameters| h.recurrent_sparsity = 1.0,
            |h: &mut HyperParameters| h.neurons = 0,
            |h: &mut HyperParameters| h.beta_candidates.clear(),
            |h: &mut HyperParameters| h.ip.sigma = 0.0,
        ] {
            let mut h = hp.clone();
            f(&mut h);
            assert!(h.validate().is_err());
        }
    }
}
