//! Deterministic spiking winner-takes-all network simulator.
//!
//! The crate contains the pieces of a complete unsupervised-learning
//! experiment:
//!
//! * [`neuron`]: LIF neurons with delta synapses and the resource-to-weight map;
//! * [`plasticity`]: the resource plasticity rules and a classic STDP baseline;
//! * [`network`]: the WTA network, neuron death/rebirth and the simulation loop;
//! * [`siggen`]: a Poisson cluster generator and a DVS camera emulator;
//! * [`eval`]: receptive fields, position decoding and recognition scores;
//! * [`experiment`]: the train / receptive-field / test protocol;
//! * [`optimize`]: genetic-algorithm hyperparameter search;
//! * [`events`]: text formats for spike events, ground truth and snapshots.
//!
//! All randomness derives from explicit seeds (see [`rng`]); identical inputs
//! give bit-identical outputs.

pub mod error;
pub mod eval;
pub mod events;
pub mod experiment;
pub mod network;
pub mod neuron;
pub mod optimize;
pub mod plasticity;
pub mod rng;
pub mod siggen;

/// Simulation time in steps of one millisecond.
pub type Timestep = u64;

pub use error::Error;
pub use network::{Network, NetworkConfig, PlasticityRule, SpikeRecord, SpikeSource};
pub use neuron::{resource_to_weight, Neuron, NeuronParams, PlasticityParams, RenormMode, Synapse, SynapseKind};
pub use plasticity::{PeriodEvent, StdpPairing, StdpParams};
pub use siggen::SignalSource;
