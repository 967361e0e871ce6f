//! Run manifests: everything needed to replay a run.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Arm, Config};
use scobul::{Error, Timestep};

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBoundaries {
    pub rf_start: Timestep,
    pub test_start: Timestep,
    pub end: Timestep,
}

impl PhaseBoundaries {
    pub fn of(config: &Config) -> Self {
        let p = config.phases.phases();
        Self { rf_start: p.rf_start(), test_start: p.test_start(), end: p.total() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub arm: Option<Arm>,
    pub seed: u64,
    /// Hash of the signal the run consumed.
    pub signal_hash: String,
    /// Hash of the config and the signal together.
    pub input_hash: String,
    pub phases: PhaseBoundaries,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub config: Config,
}

impl RunManifest {
    pub fn new(command: &str, arm: Option<Arm>, config: &Config, signal_hash: &str, outputs: &[&str]) -> Self {
        let mut config = config.clone();
        if let Some(a) = arm {
            config.arm = a;
        }
        let config_json = serde_json::to_vec(&config).expect("config serializes");
        let input_hash = sha256_hex(&[&config_json, signal_hash.as_bytes()]);
        Self {
            schema_version: MANIFEST_SCHEMA,
            command: command.to_string(),
            arm,
            seed: config.seed,
            signal_hash: signal_hash.to_string(),
            input_hash,
            phases: PhaseBoundaries::of(&config),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            config,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let m: Self = serde_json::from_str(text)
            .map_err(|e| Error::Parse { what: "manifest", line: e.line(), reason: e.to_string() })?;
        if m.schema_version != MANIFEST_SCHEMA {
            return Err(Error::Parse {
                what: "manifest",
                line: 0,
                reason: format!("schema version {} unsupported (expected {MANIFEST_SCHEMA})", m.schema_version),
            });
        }
        Ok(m)
    }
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
