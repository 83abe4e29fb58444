use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::reservoir::topology::{Source, TopologyGrid};
use crate::reservoir::weights::ReservoirWeights;

/// Network state at one timestep: the input followed by every reservoir in
/// canonical index order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub input: DVector<f64>,
    pub reservoirs: Vec<DVector<f64>>,
}

impl NetworkState {
    pub fn zeros(weights: &ReservoirWeights) -> Self {
        NetworkState {
            input: DVector::zeros(weights.n_inputs),
            reservoirs: vec![DVector::zeros(weights.neurons); weights.n_reservoirs()],
        }
    }

    /// x(t) = (u(t), x^(1)(t), ..., x^(N_L)(t)).
    pub fn concatenated(&self) -> DVector<f64> {
        let width = self.input.len() + self.reservoirs.iter().map(|r| r.len()).sum::<usize>();
        let mut out = DVector::zeros(width);
        self.write_into(out.as_mut_slice());
        out
    }

    pub(crate) fn write_into(&self, out: &mut [f64]) {
        let mut off = self.input.len();
        out[..off].copy_from_slice(self.input.as_slice());
        for r in &self.reservoirs {
            out[off..off + r.len()].copy_from_slice(r.as_slice());
            off += r.len();
        }
    }
}

/// Result of advancing one reservoir by one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutput {
    /// tanh activation before leak mixing.
    pub pre_activation: DVector<f64>,
    /// Leak-mixed state.
    pub state: DVector<f64>,
}

/// Advances reservoir `l` by one step.
///
/// `input_vec` is the concatenation of the reservoir's sources: the network
/// input first when connected, then its source reservoirs in listed order.
pub fn layer_step(
    l: usize,
    input_vec: &DVector<f64>,
    prev_state: &DVector<f64>,
    weights: &ReservoirWeights,
    leak: f64,
) -> Result<LayerOutput> {
    let layer = weights
        .layers
        .get(l)
        .ok_or_else(|| Error::dim("reservoir index", weights.n_reservoirs(), l))?;
    let n = weights.neurons;
    if prev_state.len() != n {
        return Err(Error::dim("layer_step previous state", n, prev_state.len()));
    }
    let input_width = layer.input_block.map_or(0, |_| weights.n_inputs);
    let ff_width = layer.feedforward.as_ref().map_or(0, |m| m.ncols());
    if input_vec.len() != input_width + ff_width {
        return Err(Error::dim(
            "layer_step input vector",
            input_width + ff_width,
            input_vec.len(),
        ));
    }
    let mut drive = DVector::zeros(n);
    if let Some(block) = weights.input_block(l) {
        drive.gemv(1.0, &block, &input_vec.rows(0, input_width), 1.0);
    }
    if let Some(ff) = &layer.feedforward {
        drive.gemv(1.0, ff, &input_vec.rows(input_width, ff_width), 1.0);
    }
    Ok(finish_step(weights, l, drive, prev_state, leak))
}

/// x~ = tanh(g * (drive + W^ x_prev) + b), x = (1 - a) x_prev + a x~.
fn finish_step(
    weights: &ReservoirWeights,
    l: usize,
    mut drive: DVector<f64>,
    prev_state: &DVector<f64>,
    leak: f64,
) -> LayerOutput {
    let layer = &weights.layers[l];
    drive.gemv(1.0, &layer.recurrent, prev_state, 1.0);
    let pre = drive.zip_zip_map(&layer.gain, &layer.bias, |v, g, b| (g * v + b).tanh());
    let state = prev_state.zip_map(&pre, |x, p| (1.0 - leak) * x + leak * p);
    LayerOutput {
        pre_activation: pre,
        state,
    }
}

/// Advances reservoir `l` reading its sources straight from the current
/// (partially updated) network state.
pub(crate) fn advance_layer(
    topology: &TopologyGrid,
    weights: &ReservoirWeights,
    l: usize,
    u: &DVector<f64>,
    current: &[DVector<f64>],
    prev_state: &DVector<f64>,
    leak: f64,
) -> LayerOutput {
    let n = weights.neurons;
    let mut drive = DVector::zeros(n);
    if let Some(block) = weights.input_block(l) {
        drive.gemv(1.0, &block, u, 1.0);
    }
    if let Some(ff) = &weights.layers[l].feedforward {
        let mut col = 0;
        for s in topology.sources(l) {
            if let Source::Reservoir(k) = *s {
                drive.gemv(1.0, &ff.columns(col, n), &current[k], 1.0);
                col += n;
            }
        }
    }
    finish_step(weights, l, drive, prev_state, leak)
}

/// One evolved timestep as seen by [`drive`] callbacks.
pub struct StepView<'a> {
    pub t: usize,
    pub input: &'a DVector<f64>,
    pub states: &'a [DVector<f64>],
    pub pre_activations: &'a [DVector<f64>],
}

/// Evolves the network over `inputs` (N_t x N_U, one row per timestep),
/// handing every timestep to `visit` without storing the trajectory.
pub fn drive<F>(
    topology: &TopologyGrid,
    weights: &ReservoirWeights,
    leak: f64,
    inputs: &DMatrix<f64>,
    initial: Option<&NetworkState>,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(StepView<'_>),
{
    weights.check_shapes(topology)?;
    if inputs.ncols() != weights.n_inputs {
        return Err(Error::dim(
            "input columns",
            weights.n_inputs,
            inputs.ncols(),
        ));
    }
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "input sequence contains non-finite values".into(),
        ));
    }
    let n = weights.neurons;
    let mut states = match initial {
        Some(s) => {
            if s.reservoirs.len() != weights.n_reservoirs()
                || s.reservoirs.iter().any(|r| r.len() != n)
            {
                return Err(Error::dim(
                    "initial state width",
                    weights.state_width(),
                    s.concatenated().len(),
                ));
            }
            s.reservoirs.clone()
        }
        None => vec![DVector::zeros(n); weights.n_reservoirs()],
    };
    let mut pre = vec![DVector::zeros(n); weights.n_reservoirs()];
    for t in 0..inputs.nrows() {
        let u = inputs.row(t).transpose();
        for &l in topology.order() {
            // sources precede l in evolution order, so `states` already
            // holds their timestep-t values while states[l] is still t-1
            let out = advance_layer(topology, weights, l, &u, &states, &states[l], leak);
            states[l] = out.state;
            pre[l] = out.pre_activation;
        }
        visit(StepView {
            t,
            input: &u,
            states: &states,
            pre_activations: &pre,
        });
    }
    Ok(())
}

/// Evolves the network and returns the state at every timestep.
pub fn run_network(
    topology: &TopologyGrid,
    weights: &ReservoirWeights,
    leak: f64,
    inputs: &DMatrix<f64>,
    initial: Option<&NetworkState>,
) -> Result<Vec<NetworkState>> {
    let mut out = Vec::with_capacity(inputs.nrows());
    drive(topology, weights, leak, inputs, initial, |step| {
        out.push(NetworkState {
            input: step.input.clone(),
            reservoirs: step.states.to_vec(),
        })
    })?;
    Ok(out)
}
