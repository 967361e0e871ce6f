//! Front end for the `scobul` binary: configuration, run manifests and the
//! `signal`, `experiment`, `optimize` and `report` verbs.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{cmd_experiment, cmd_optimize, cmd_report, cmd_signal};
pub use config::{Arm, Config};
pub use error::CliError;
pub use manifest::RunManifest;
