pub mod data;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod plasticity;
pub mod pso;
pub mod readout;
pub mod reservoir;
pub mod rng;
mod serde_matrix;
