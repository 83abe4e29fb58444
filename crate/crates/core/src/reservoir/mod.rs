//! Network construction and state evolution.

mod network;
mod params;
pub mod spectral;
mod topology;
mod weights;

pub(crate) use network::advance_layer;
pub use network::{drive, layer_step, run_network, LayerOutput, NetworkState, StepView};
pub use params::{default_beta_candidates, HyperParameters, InitScheme};
pub use spectral::{scale_spectral_radius, spectral_radius};
pub use topology::{Source, TopologyGrid};
pub use weights::{init_weights, ReservoirLayer, ReservoirWeights};
