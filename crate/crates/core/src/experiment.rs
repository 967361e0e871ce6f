//! The three-phase protocol: train with plasticity on, freeze and measure
//! receptive fields, then score position decoding on a test segment. Also a
//! train-then-score protocol for the cluster task, and the mapping from named
//! hyperparameters onto a network configuration.

use serde::{Deserialize, Serialize};

use crate::eval::{self, ClusterReport, MsdScore, Phase, PhaseMetric, ReceptiveFields};
use crate::network::{Network, NetworkConfig, PlasticityRule, SpikeRecord, SpikeSource};
use crate::siggen::{EventStream, GroundTruthLog, ScenePhasePoint};
use crate::{Error, Timestep};

/// Phase lengths in steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phases {
    pub train: Timestep,
    pub rf: Timestep,
    pub test: Timestep,
}

impl Phases {
    pub fn total(&self) -> Timestep {
        self.train + self.rf + self.test
    }

    pub fn rf_start(&self) -> Timestep {
        self.train
    }

    pub fn test_start(&self) -> Timestep {
        self.train + self.rf
    }
}

/// A recorded light-spot signal with everything the scorer needs from it.
#[derive(Debug, Clone)]
pub struct SceneData {
    pub stream: EventStream,
    pub trajectory: Vec<ScenePhasePoint>,
    pub metric: PhaseMetric,
    pub centroid: Phase,
}

impl SceneData {
    pub fn new(stream: EventStream, trajectory: Vec<ScenePhasePoint>) -> Result<Self, Error> {
        if stream.len() != trajectory.len() {
            return Err(Error::invalid(
                "trajectory",
                format!("{} trajectory points for {} signal steps", trajectory.len(), stream.len()),
            ));
        }
        let metric = eval::fit_phase_metric(&trajectory)?;
        let centroid = eval::centroid(&trajectory, &metric);
        Ok(Self { stream, trajectory, metric, centroid })
    }
}

#[derive(Debug)]
pub struct SceneOutcome {
    /// `Err(NoPredictions)` when every test window was silent.
    pub score: Result<MsdScore, Error>,
    pub fields: ReceptiveFields,
    /// Spikes per neuron over the test segment.
    pub test_spike_counts: Vec<u64>,
    pub rebirths: u64,
    pub network: Network,
}

fn collect_neuron_spikes(
    net: &mut Network,
    data: &EventStream,
    duration: Timestep,
    plasticity: bool,
) -> Result<Vec<SpikeRecord>, Error> {
    let mut log = Vec::new();
    net.run_with(&mut data.replay(), duration, plasticity, |t, _, fired| {
        log.extend(fired.iter().map(|&j| SpikeRecord { t, source: SpikeSource::Neuron(j) }));
    })?;
    Ok(log)
}

/// Runs train / receptive-field / test on a recorded scene.
pub fn run_scene_experiment(
    config: &NetworkConfig,
    phases: Phases,
    window: Timestep,
    data: &SceneData,
) -> Result<SceneOutcome, Error> {
    if (data.stream.len() as Timestep) < phases.total() {
        return Err(Error::SignalExhausted { steps: data.stream.len() as Timestep, needed: phases.total() });
    }
    let mut net = Network::build_wta(config.clone())?;
    net.run_with(&mut data.stream.replay(), phases.train, true, |_, _, _| {})?;
    let rf_log = collect_neuron_spikes(&mut net, &data.stream, phases.rf, false)?;
    let test_log = collect_neuron_spikes(&mut net, &data.stream, phases.test, false)?;

    let fields = eval::receptive_centers(&rf_log, &data.trajectory, &data.metric, config.n_neurons);
    let start = phases.test_start();
    let end = start + phases.test;
    let predictions = eval::predict_positions(&test_log, &fields.centers, start, end, window);
    let truth = eval::truth_windows(&data.trajectory, &data.metric, start, end, window);
    let score = eval::normalized_msd(&predictions, &truth, &data.centroid);

    let mut test_spike_counts = vec![0u64; config.n_neurons];
    for r in &test_log {
        if let SpikeSource::Neuron(j) = r.source {
            test_spike_counts[j as usize] += 1;
        }
    }
    Ok(SceneOutcome { score, fields, test_spike_counts, rebirths: net.rebirths(), network: net })
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub report: ClusterReport,
    pub test_spike_counts: Vec<u64>,
    pub rebirths: u64,
    pub network: Network,
}

/// Trains for `train` steps, then scores recognition over the following
/// `test` steps with plasticity frozen.
pub fn run_cluster_experiment(
    config: &NetworkConfig,
    train: Timestep,
    test: Timestep,
    stream: &EventStream,
    truth: &GroundTruthLog,
    high_f1: f64,
) -> Result<ClusterOutcome, Error> {
    let mut net = Network::build_wta(config.clone())?;
    net.run_with(&mut stream.replay(), train, true, |_, _, _| {})?;
    let log = collect_neuron_spikes(&mut net, stream, test, false)?;
    let report = eval::cluster_recognition_report(&log, config.n_neurons, truth, train, train + test, high_f1);
    let mut test_spike_counts = vec![0u64; config.n_neurons];
    for r in &log {
        if let SpikeSource::Neuron(j) = r.source {
            test_spike_counts[j as usize] += 1;
        }
    }
    Ok(ClusterOutcome { report, test_spike_counts, rebirths: net.rebirths(), network: net })
}

/// Names accepted by [`apply_hyperparameter`].
pub const HYPERPARAMETERS: &[&str] = &[
    "threshold",
    "tau_m",
    "refractory",
    "inhibition",
    "input_connectivity",
    "initial_resource_low",
    "initial_resource_high",
    "death_silence_threshold",
    "w_max",
    "tau_p",
    "d",
    "d_plus",
    "d_minus",
    "a_plus",
    "a_minus",
    "tau_plus",
    "tau_minus",
    "stdp_w_max",
];

/// Sets one named hyperparameter. Integer-valued ones are rounded; names that
/// belong to the other plasticity arm are ignored, unknown names rejected.
pub fn apply_hyperparameter(config: &mut NetworkConfig, name: &str, value: f64) -> Result<(), Error> {
    let round = |v: f64| v.round().max(0.0);
    match (name, &mut config.rule) {
        ("threshold", _) => config.neuron.threshold = value,
        ("tau_m", _) => config.neuron.tau_m = value,
        ("refractory", _) => config.neuron.refractory = round(value) as u32,
        ("inhibition", _) => config.inhibitory_weight = -value.abs(),
        ("input_connectivity", _) => config.input_connectivity = value.clamp(1e-9, 1.0),
        ("initial_resource_low", _) => config.initial_resource.0 = value,
        ("initial_resource_high", _) => config.initial_resource.1 = value,
        ("death_silence_threshold", _) => config.death_silence_threshold = Some(round(value).max(1.0) as u64),
        ("w_max", PlasticityRule::Scobul(p)) => p.w_max = value,
        ("tau_p", PlasticityRule::Scobul(p)) => p.tau_p = round(value).max(1.0) as Timestep,
        ("d", PlasticityRule::Scobul(p)) => p.d = value,
        ("d_plus", PlasticityRule::Scobul(p)) => p.d_plus = value,
        ("d_minus", PlasticityRule::Scobul(p)) => p.d_minus = value,
        ("a_plus", PlasticityRule::Stdp(p)) => p.a_plus = value,
        ("a_minus", PlasticityRule::Stdp(p)) => p.a_minus = value,
        ("tau_plus", PlasticityRule::Stdp(p)) => p.tau_plus = value,
        ("tau_minus", PlasticityRule::Stdp(p)) => p.tau_minus = value,
        ("stdp_w_max", PlasticityRule::Stdp(p)) => p.w_max = value,
        (n, _) if HYPERPARAMETERS.contains(&n) => {}
        (n, _) => return Err(Error::invalid(format!("search.{n}"), "unknown hyperparameter")),
    }
    if config.initial_resource.0 > config.initial_resource.1 {
        config.initial_resource = (config.initial_resource.1, config.initial_resource.0);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::{NeuronParams, PlasticityParams, RenormMode};

    fn config() -> NetworkConfig {
        NetworkConfig {
            n_inputs: 10,
            n_neurons: 3,
            input_connectivity: 1.0,
            initial_resource: (0.0, 1.0),
            inhibitory_weight: -1.0,
            death_silence_threshold: None,
            neuron: NeuronParams { threshold: 1.0, tau_m: 10.0, refractory: 1 },
            rule: PlasticityRule::Scobul(PlasticityParams {
                w_min: 0.0,
                w_max: 1.0,
                tau_p: 10,
                d: 0.1,
                d_plus: 0.1,
                d_minus: 0.1,
                renorm: RenormMode::Immediate,
            }),
            seed: 0,
        }
    }

    #[test]
    fn hyperparameters_land_in_config() {
        let mut c = config();
        apply_hyperparameter(&mut c, "inhibition", 3.0).unwrap();
        apply_hyperparameter(&mut c, "tau_p", 7.6).unwrap();
        apply_hyperparameter(&mut c, "a_plus", 0.5).unwrap();
        assert_eq!(c.inhibitory_weight, -3.0);
        assert!(matches!(c.rule, PlasticityRule::Scobul(p) if p.tau_p == 8));
        assert!(apply_hyperparameter(&mut c, "bogus", 1.0).is_err());
    }
}
