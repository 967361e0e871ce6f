use thiserror::Error;

use crate::Timestep;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("synapse {synapse} of neuron {neuron} is not plastic")]
    NotPlastic { neuron: u32, synapse: usize },

    #[error("signal source exhausted after {steps} steps (needed {needed})")]
    SignalExhausted { steps: Timestep, needed: Timestep },

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("no prediction windows: every test window was silent")]
    NoPredictions,

    #[error("malformed {what} at line {line}: {reason}")]
    Parse { what: &'static str, line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig { key: key.into(), reason: reason.into() }
    }

    /// Short machine-readable class name, printed by the CLI on failure.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidConfig { .. } => "config",
            Error::NotPlastic { .. } => "contract",
            Error::SignalExhausted { .. } => "signal",
            Error::DegenerateScene(_) => "scene",
            Error::Calibration(_) => "calibration",
            Error::NoPredictions => "silent-network",
            Error::Parse { .. } => "format",
            Error::Io(_) => "io",
        }
    }
}
