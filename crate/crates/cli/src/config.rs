//! Run configuration: one TOML file with a section per module.
//!
//! ```toml
//! seed = 1
//! arm = "scobul"
//!
//! [signal]
//! kind = "cluster"
//! n_nodes = 100
//! p0 = 0.005
//! n_clusters = 5
//! cluster_size = 10
//! activation_prob = 0.001
//! active_steps = 200
//! rate = 0.045
//!
//! [network]
//! n_neurons = 20
//! input_connectivity = 0.5
//! initial_resource = [0.0, 1.0]
//! inhibitory_weight = -2.0
//! death_silence_threshold = 20000
//!
//! [neuron]
//! threshold = 1.0
//! tau_m = 10.0
//! refractory = 5
//!
//! [scobul]
//! w_max = 1.0
//! tau_p = 10
//! d = 0.02
//! d_plus = 0.1
//! d_minus = 0.01
//!
//! [phases]
//! train = 200000
//! rf = 0
//! test = 50000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scobul::experiment::{apply_hyperparameter, Phases};
use scobul::optimize::{GaConfig, SearchParam, SearchSpace};
use scobul::siggen::{ClusterSignalSpec, DvsConfig, SceneConfig};
use scobul::{Error, NetworkConfig, NeuronParams, PlasticityParams, PlasticityRule, StdpParams, Timestep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Scobul,
    Stdp,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Scobul => "scobul",
            Arm::Stdp => "stdp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalConfig {
    Cluster {
        n_nodes: usize,
        p0: f64,
        n_clusters: usize,
        cluster_size: usize,
        activation_prob: f64,
        active_steps: Timestep,
        rate: f64,
    },
    Dvs {
        width: usize,
        height: usize,
        #[serde(default = "default_target_rate")]
        target_mean_rate: f64,
        spot_radius: f64,
        speed_min: f64,
        speed_max: f64,
        #[serde(default)]
        rearm_prob: f64,
        #[serde(default = "default_calibration_frames")]
        calibration_frames: Timestep,
    },
}

fn default_target_rate() -> f64 {
    30.0
}

fn default_calibration_frames() -> Timestep {
    20_000
}

impl SignalConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            SignalConfig::Cluster { .. } => "cluster",
            SignalConfig::Dvs { .. } => "dvs",
        }
    }

    pub fn n_channels(&self) -> usize {
        match self {
            SignalConfig::Cluster { n_nodes, .. } => *n_nodes,
            SignalConfig::Dvs { width, height, .. } => 3 * width * height,
        }
    }

    pub fn cluster_spec(&self, seed: u64) -> Option<ClusterSignalSpec> {
        match *self {
            SignalConfig::Cluster { n_nodes, p0, n_clusters, cluster_size, activation_prob, active_steps, rate } => {
                Some(ClusterSignalSpec::disjoint(
                    n_nodes,
                    n_clusters,
                    cluster_size,
                    p0,
                    activation_prob,
                    active_steps,
                    rate,
                    seed,
                ))
            }
            SignalConfig::Dvs { .. } => None,
        }
    }

    /// Uncalibrated camera and scene settings.
    pub fn dvs(&self, seed: u64) -> Option<(DvsConfig, SceneConfig, Timestep)> {
        match *self {
            SignalConfig::Dvs {
                width,
                height,
                target_mean_rate,
                spot_radius,
                speed_min,
                speed_max,
                rearm_prob,
                calibration_frames,
            } => Some((
                DvsConfig {
                    width,
                    height,
                    brightness_rate_scale: 1.0,
                    change_threshold: 1.0,
                    target_mean_rate,
                    seed,
                },
                SceneConfig { spot_radius, speed_range: (speed_min, speed_max), rearm_prob },
                calibration_frames,
            )),
            SignalConfig::Cluster { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub n_neurons: usize,
    pub input_connectivity: f64,
    pub initial_resource: (f64, f64),
    pub inhibitory_weight: f64,
    /// Absent disables death and rebirth.
    #[serde(default)]
    pub death_silence_threshold: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    pub train: Timestep,
    #[serde(default)]
    pub rf: Timestep,
    pub test: Timestep,
    #[serde(default = "default_window")]
    pub window: Timestep,
}

fn default_window() -> Timestep {
    40
}

impl PhaseSection {
    pub fn phases(&self) -> Phases {
        Phases { train: self.train, rf: self.rf, test: self.test }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_high_f1")]
    pub high_f1: f64,
}

fn default_high_f1() -> f64 {
    0.5
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { high_f1: default_high_f1() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaSection {
    pub population: usize,
    #[serde(default = "default_mutation")]
    pub mutation_prob: f64,
    #[serde(default = "default_elitism")]
    pub elitism_frac: f64,
    #[serde(default = "default_seeds_per_fitness")]
    pub seeds_per_fitness: usize,
    #[serde(default)]
    pub max_generations: Option<usize>,
    /// Defaults to the root seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_mutation() -> f64 {
    0.5
}

fn default_elitism() -> f64 {
    0.1
}

fn default_seeds_per_fitness() -> usize {
    3
}

/// Searched hyperparameters: `common` applies to both arms, the others to
/// their arm only.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default)]
    pub common: Vec<SearchParam>,
    #[serde(default)]
    pub scobul: Vec<SearchParam>,
    #[serde(default)]
    pub stdp: Vec<SearchParam>,
}

/// Replays a signal written by `scobul signal` instead of generating one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    #[serde(default = "default_arm")]
    pub arm: Arm,
    pub signal: SignalConfig,
    pub network: NetworkSection,
    pub neuron: NeuronParams,
    #[serde(default)]
    pub scobul: Option<PlasticityParams>,
    #[serde(default)]
    pub stdp: Option<StdpParams>,
    pub phases: PhaseSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub ga: Option<GaSection>,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub replay: Option<ReplaySection>,
}

fn default_arm() -> Arm {
    Arm::Scobul
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::invalid("<toml>", one_line(&e.to_string())))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let reason = one_line(&e.into_inner().to_string());
            // a missing field is reported at its parent; name the field itself
            let missing = reason.split_once("missing field `").and_then(|(_, r)| r.split('`').next());
            let key = match missing {
                Some(field) if key == "." => field.to_string(),
                Some(field) => format!("{key}.{field}"),
                None => key,
            };
            Error::invalid(key, reason)
        })
    }

    /// Loads a TOML config, or the config embedded in a run manifest (`.json`).
    /// A relative replay directory is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        let mut config = if path.extension().is_some_and(|e| e == "json") {
            crate::manifest::RunManifest::from_json(&text)?.config
        } else {
            Self::from_toml(&text)?
        };
        if let Some(r) = &mut config.replay {
            if r.dir.is_relative() {
                if let Some(parent) = path.parent() {
                    r.dir = parent.join(&r.dir);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if let Some(spec) = self.signal.cluster_spec(self.seed) {
            spec.validate()?;
        }
        if let Some((dvs, scene, _)) = self.signal.dvs(self.seed) {
            dvs.validate()?;
            scene.validate(&dvs)?;
        }
        if self.phases.window == 0 {
            return Err(Error::invalid("phases.window", "must be positive"));
        }
        if self.phases.test == 0 {
            return Err(Error::invalid("phases.test", "must be positive"));
        }
        self.network_config(self.arm, self.seed)?.validate()
    }

    pub fn duration(&self) -> Timestep {
        self.phases.phases().total()
    }

    /// The network for `arm`; both arms share every setting except the rule.
    pub fn network_config(&self, arm: Arm, seed: u64) -> Result<NetworkConfig, Error> {
        let rule = match arm {
            Arm::Scobul => PlasticityRule::Scobul(self.scobul.ok_or_else(|| Error::invalid("scobul", "section required for arm scobul"))?),
            Arm::Stdp => PlasticityRule::Stdp(self.stdp.ok_or_else(|| Error::invalid("stdp", "section required for arm stdp"))?),
        };
        let n = &self.network;
        Ok(NetworkConfig {
            n_inputs: self.signal.n_channels(),
            n_neurons: n.n_neurons,
            input_connectivity: n.input_connectivity,
            initial_resource: n.initial_resource,
            inhibitory_weight: n.inhibitory_weight,
            death_silence_threshold: n.death_silence_threshold,
            neuron: self.neuron,
            rule,
            seed,
        })
    }

    pub fn search_space(&self, arm: Arm) -> SearchSpace {
        let own = match arm {
            Arm::Scobul => &self.search.scobul,
            Arm::Stdp => &self.search.stdp,
        };
        SearchSpace { params: self.search.common.iter().chain(own).cloned().collect() }
    }

    pub fn ga_config(&self) -> Result<GaConfig, Error> {
        let g = self.ga.ok_or_else(|| Error::invalid("ga", "section required for optimize"))?;
        Ok(GaConfig {
            population: g.population,
            mutation_prob: g.mutation_prob,
            elitism_frac: g.elitism_frac,
            seeds_per_fitness: g.seeds_per_fitness,
            max_generations: g.max_generations,
            seed: g.seed.unwrap_or(self.seed),
        })
    }

    /// Network config with a decoded genome applied.
    pub fn with_genes(&self, arm: Arm, seed: u64, genes: &[(&str, f64)]) -> Result<NetworkConfig, Error> {
        let mut c = self.network_config(arm, seed)?;
        for &(name, value) in genes {
            apply_hyperparameter(&mut c, name, value)?;
        }
        Ok(c)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `train,rf,test`.
pub fn parse_phase_lengths(s: &str) -> Result<(Timestep, Timestep, Timestep), Error> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::invalid("--phase-lengths", format!("expected `train,rf,test`, got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<Timestep> = parts.iter().map(|p| p.parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    Ok((v[0], v[1], v[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CLUSTER: &str = r#"
seed = 3
[signal]
kind = "cluster"
n_nodes = 20
p0 = 0.005
n_clusters = 2
cluster_size = 5
activation_prob = 0.002
active_steps = 100
rate = 0.045
[network]
n_neurons = 4
input_connectivity = 0.5
initial_resource = [0.0, 1.0]
inhibitory_weight = -2.0
[neuron]
threshold = 1.0
tau_m = 10.0
refractory = 5
[scobul]
w_max = 1.0
tau_p = 10
d = 0.02
d_plus = 0.1
d_minus = 0.01
[phases]
train = 1000
test = 500
"#;

    #[test]
    fn parses_and_defaults() {
        let c = Config::from_toml(CLUSTER).unwrap();
        assert_eq!(c.arm, Arm::Scobul);
        assert_eq!(c.phases.window, 40);
        assert_eq!(c.signal.n_channels(), 20);
        c.validate().unwrap();
        assert!(c.network_config(Arm::Stdp, 0).is_err());
    }

    #[test]
    fn missing_key_is_named() {
        let text = CLUSTER.replace("tau_m = 10.0\n", "");
        let e = Config::from_toml(&text).unwrap_err();
        assert!(matches!(&e, Error::InvalidConfig { key, .. } if key == "neuron.tau_m"), "{e}");
        let text = CLUSTER.replace("d_minus = 0.01\n", "d_minus = 0.01\nbogus = 1\n");
        let e = Config::from_toml(&text).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn phase_lengths_flag() {
        assert_eq!(parse_phase_lengths("10, 20,30").unwrap(), (10, 20, 30));
        assert!(parse_phase_lengths("10,20").is_err());
    }
}
