use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::params::{HyperParameters, InitScheme};
use crate::reservoir::spectral::scale_spectral_radius;
use crate::reservoir::topology::TopologyGrid;
use crate::rng::{substream, StreamRng};
use crate::serde_matrix;

/// Weights of a single reservoir.
///
/// Matrices act on column vectors: `feedforward` is N_R x (k * N_R) for `k`
/// reservoir sources and `recurrent` is N_R x N_R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirLayer {
    /// Row block of the joint input matrix owned by this reservoir.
    pub input_block: Option<usize>,
    #[serde(with = "serde_matrix::option")]
    pub feedforward: Option<DMatrix<f64>>,
    #[serde(with = "serde_matrix")]
    pub recurrent: DMatrix<f64>,
    #[serde(with = "serde_matrix::vector")]
    pub gain: DVector<f64>,
    #[serde(with = "serde_matrix::vector")]
    pub bias: DVector<f64>,
}

/// Untrained weights of a network plus the per-neuron IP gain and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirWeights {
    pub n_inputs: usize,
    pub neurons: usize,
    pub seed: u64,
    /// Joint input matrix, (input-connected reservoirs * N_R) x N_U.
    #[serde(with = "serde_matrix::option")]
    pub input: Option<DMatrix<f64>>,
    pub layers: Vec<ReservoirLayer>,
}

impl ReservoirWeights {
    pub fn n_reservoirs(&self) -> usize {
        self.layers.len()
    }

    /// N_R x N_U slice of the joint input matrix feeding reservoir `l`.
    pub fn input_block(&self, l: usize) -> Option<nalgebra::DMatrixView<'_, f64>> {
        let block = self.layers[l].input_block?;
        let input = self.input.as_ref()?;
        Some(input.rows(block * self.neurons, self.neurons))
    }

    /// Width of the concatenated state vector x(t).
    pub fn state_width(&self) -> usize {
        self.n_inputs + self.layers.len() * self.neurons
    }

    pub fn check_shapes(&self, topology: &TopologyGrid) -> Result<()> {
        if self.layers.len() != topology.n_reservoirs() {
            return Err(Error::dim(
                "reservoir count",
                topology.n_reservoirs(),
                self.layers.len(),
            ));
        }
        let n = self.neurons;
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.recurrent.shape() != (n, n) {
                return Err(Error::dim(
                    "recurrent matrix rows",
                    n,
                    layer.recurrent.nrows(),
                ));
            }
            if layer.gain.len() != n || layer.bias.len() != n {
                return Err(Error::dim("gain/bias length", n, layer.gain.len()));
            }
            let k = topology.reservoir_sources(l).count();
            match (&layer.feedforward, k) {
                (None, 0) => {}
                (Some(ff), k) if k > 0 && ff.shape() == (n, k * n) => {}
                (ff, _) => {
                    return Err(Error::dim(
                        "feedforward matrix columns",
                        k * n,
                        ff.as_ref().map_or(0, |m| m.ncols()),
                    ))
                }
            }
            if topology.reads_input(l) != layer.input_block.is_some() {
                return Err(Error::Topology(format!(
                    "reservoir {l}: input wiring disagrees with the topology"
                )));
            }
        }
        if let Some(input) = &self.input {
            let blocks = topology.input_connected().len();
            if input.shape() != (blocks * n, self.n_inputs) {
                return Err(Error::dim("input matrix rows", blocks * n, input.nrows()));
            }
        }
        Ok(())
    }
}

/// Draws all untrained weights for `topology`.
///
/// Each matrix comes from its own named substream of `seed`, so the draws of
/// one reservoir do not depend on how many others exist.
pub fn init_weights(
    topology: &TopologyGrid,
    hp: &HyperParameters,
    n_inputs: usize,
    seed: u64,
) -> Result<ReservoirWeights> {
    if n_inputs < 1 {
        return Err(Error::HyperParameters(
            "network needs at least one input".into(),
        ));
    }
    hp.validate()?;
    let n = hp.neurons;
    let connected = topology.input_connected();

    // Joint input matrix: blocks drawn per reservoir, then scaled together.
    let mut input = DMatrix::zeros(connected.len() * n, n_inputs);
    for (block, &l) in connected.iter().enumerate() {
        let mut rng = substream(seed, &format!("input/{l}"));
        let fan_in = n_inputs;
        let fan_out = connected.len() * n;
        let sub = draw_matrix(
            &mut rng,
            n,
            n_inputs,
            hp.init_scheme,
            fan_in,
            fan_out,
            hp.input_sparsity,
        );
        input.rows_mut(block * n, n).copy_from(&sub);
    }
    if hp.init_scheme == InitScheme::UniformNorm {
        rescale_frobenius(&mut input, hp.input_norm);
    }

    let mut layers = Vec::with_capacity(topology.n_reservoirs());
    for l in 0..topology.n_reservoirs() {
        let k = topology.reservoir_sources(l).count();
        let feedforward = if k > 0 {
            let mut rng = substream(seed, &format!("feedforward/{l}"));
            let mut ff = draw_matrix(
                &mut rng,
                n,
                k * n,
                hp.init_scheme,
                k * n,
                n,
                hp.feedforward_sparsity,
            );
            if hp.init_scheme == InitScheme::UniformNorm {
                rescale_frobenius(&mut ff, hp.feedforward_norm);
            }
            Some(ff)
        } else {
            None
        };

        let mut rng = substream(seed, &format!("recurrent/{l}"));
        let raw = draw_matrix(
            &mut rng,
            n,
            n,
            InitScheme::UniformNorm,
            n,
            n,
            hp.recurrent_sparsity,
        );
        if raw.iter().all(|v| *v == 0.0) {
            return Err(Error::SpectralScaling(format!(
                "sparsity mask nullified the whole recurrent matrix of reservoir {l}"
            )));
        }
        let recurrent =
            scale_spectral_radius(&raw, hp.leak, hp.spectral_radius).map_err(|e| match e {
                Error::SpectralScaling(m) => Error::SpectralScaling(format!("reservoir {l}: {m}")),
                other => other,
            })?;

        layers.push(ReservoirLayer {
            input_block: connected.iter().position(|&c| c == l),
            feedforward,
            recurrent,
            gain: DVector::from_element(n, 1.0),
            bias: DVector::zeros(n),
        });
    }

    Ok(ReservoirWeights {
        n_inputs,
        neurons: n,
        seed,
        input: if connected.is_empty() {
            None
        } else {
            Some(input)
        },
        layers,
    })
}

/// Dense draw followed by an independent Bernoulli nullification mask.
fn draw_matrix(
    rng: &mut StreamRng,
    rows: usize,
    cols: usize,
    scheme: InitScheme,
    fan_in: usize,
    fan_out: usize,
    sparsity: f64,
) -> DMatrix<f64> {
    let uniform = Uniform::new(-1.0, 1.0).expect("valid range");
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    DMatrix::from_fn(rows, cols, |_, _| {
        let v = match scheme {
            InitScheme::UniformNorm => uniform.sample(rng),
            InitScheme::Glorot => normal.sample(rng),
        };
        let keep = sparsity == 0.0 || rng.random::<f64>() >= sparsity;
        if keep {
            v
        } else {
            0.0
        }
    })
}

fn rescale_frobenius(m: &mut DMatrix<f64>, target: f64) {
    let norm = m.norm();
    if norm > 0.0 {
        *m *= target / norm;
    }
}
