//! Single-layer winner-takes-all network.
//!
//! Every neuron receives plastic excitatory synapses from a random subset of
//! the input nodes and one fixed inhibitory synapse from every other neuron.
//! A neuron firing at `t` inhibits the others at `t + 1`.
//!
//! Neurons that stay silent for `death_silence_threshold` steps while the
//! network is learning are rebuilt from scratch with a fresh input subset and
//! fresh resources; their inhibitory wiring is kept.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::neuron::{Neuron, NeuronParams, PlasticityParams, RenormMode, Synapse};
use crate::plasticity::{self, StdpParams};
use crate::rng::{self, Rng};
use crate::siggen::SignalSource;
use crate::{Error, Timestep};

const NO_SLOT: u32 = u32::MAX;

/// Which plasticity engine drives the excitatory synapses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlasticityRule {
    Scobul(PlasticityParams),
    Stdp(StdpParams),
}

impl PlasticityRule {
    pub fn arm_name(&self) -> &'static str {
        match self {
            PlasticityRule::Scobul(_) => "scobul",
            PlasticityRule::Stdp(_) => "stdp",
        }
    }

    /// Weight an initial resource maps to under this engine.
    fn initial_weight(&self, resource: f64) -> f64 {
        match self {
            PlasticityRule::Scobul(p) => p.weight_of(resource),
            PlasticityRule::Stdp(p) => crate::resource_to_weight(resource, 0.0, p.w_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_inputs: usize,
    pub n_neurons: usize,
    /// Fraction of the input nodes each neuron connects to.
    pub input_connectivity: f64,
    /// Uniform range the initial resource of each plastic synapse is drawn from.
    pub initial_resource: (f64, f64),
    pub inhibitory_weight: f64,
    /// Silent steps after which a neuron is rebuilt; `None` disables rebirth.
    pub death_silence_threshold: Option<u64>,
    pub neuron: NeuronParams,
    pub rule: PlasticityRule,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.n_neurons < 2 {
            return Err(Error::invalid("network.n_neurons", "a WTA network needs at least 2 neurons"));
        }
        if self.n_inputs == 0 {
            return Err(Error::invalid("network.n_inputs", "must be positive"));
        }
        if !(self.input_connectivity > 0.0 && self.input_connectivity <= 1.0) {
            return Err(Error::invalid("network.input_connectivity", "must lie in (0, 1]"));
        }
        if !(self.initial_resource.0 <= self.initial_resource.1) {
            return Err(Error::invalid("network.initial_resource", "low must not exceed high"));
        }
        if !(self.inhibitory_weight < 0.0) {
            return Err(Error::invalid("network.inhibitory_weight", "must be strictly negative"));
        }
        if self.death_silence_threshold == Some(0) {
            return Err(Error::invalid("network.death_silence_threshold", "must be positive"));
        }
        self.neuron.validate()?;
        match &self.rule {
            PlasticityRule::Scobul(p) => p.validate(),
            PlasticityRule::Stdp(p) => p.validate(),
        }
    }

    /// Number of plastic synapses per neuron.
    pub fn synapses_per_neuron(&self) -> usize {
        let k = (self.input_connectivity * self.n_inputs as f64 - 1e-9).ceil() as usize;
        k.clamp(1, self.n_inputs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpikeSource {
    Input(u32),
    Neuron(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub t: Timestep,
    pub source: SpikeSource,
}

/// Plasticity events recorded when tracing is on (used for auditing).
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    PeriodOpened { neuron: u32, center: Timestep },
    PeriodClosed { neuron: u32, center: Timestep, at: Timestep },
    Potentiated { neuron: u32, synapse: usize, t: Timestep, center: Timestep },
    PreDepressed { neuron: u32, synapse: usize, t: Timestep },
    SilentDepressed { neuron: u32, synapse: usize, t: Timestep, center: Timestep, resource_before: f64 },
    Reborn { neuron: u32, t: Timestep },
}

#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    neurons: Vec<Neuron>,
    /// `slots[j * n_inputs + i]`: index of the synapse from input `i` on neuron `j`.
    slots: Vec<u32>,
    rng: Rng,
    fired_prev: Vec<u32>,
    fired_now: Vec<u32>,
    input_sums: Vec<f64>,
    now: Timestep,
    plasticity_on: bool,
    trace: Option<Vec<TraceEvent>>,
    rebirths: u64,
}

impl Network {
    /// Builds the WTA network described by `config`.
    pub fn build_wta(config: NetworkConfig) -> Result<Self, Error> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, "topology");
        let n = config.n_neurons;
        let mut slots = vec![NO_SLOT; n * config.n_inputs];
        let mut neurons = Vec::with_capacity(n);
        for j in 0..n {
            let plastic = draw_plastic(&config, &mut rng);
            for (k, s) in plastic.iter().enumerate() {
                slots[j * config.n_inputs + s.source as usize] = k as u32;
            }
            let inhibitory = (0..n as u32)
                .filter(|&f| f as usize != j)
                .map(|f| Synapse::inhibitory(f, config.inhibitory_weight))
                .collect();
            let mut neuron = Neuron::new(j as u32, &config.neuron, plastic, inhibitory);
            neuron.live_weights = matches!(config.rule, PlasticityRule::Scobul(p) if p.renorm == RenormMode::Immediate);
            neurons.push(neuron);
        }
        if config.synapses_per_neuron() < 2 {
            log::warn!("one plastic synapse per neuron: resource conservation is impossible");
        }
        Ok(Self {
            neurons,
            slots,
            rng,
            fired_prev: Vec::new(),
            fired_now: Vec::new(),
            input_sums: vec![0.0; n],
            now: 0,
            plasticity_on: true,
            trace: None,
            rebirths: 0,
            config,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn neurons_mut(&mut self) -> &mut [Neuron] {
        &mut self.neurons
    }

    /// The next step to be simulated.
    pub fn now(&self) -> Timestep {
        self.now
    }

    pub fn rebirths(&self) -> u64 {
        self.rebirths
    }

    pub fn set_plasticity(&mut self, on: bool) {
        self.plasticity_on = on;
    }

    pub fn plasticity_on(&self) -> bool {
        self.plasticity_on
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Resources of all plastic synapses, neuron by neuron (resource rule) or
    /// the weights (STDP rule).
    pub fn plastic_state(&self) -> Vec<Vec<f64>> {
        self.neurons
            .iter()
            .map(|n| match self.config.rule {
                PlasticityRule::Scobul(_) => (0..n.n_plastic()).map(|k| n.resource(k)).collect(),
                PlasticityRule::Stdp(_) => n.plastic_synapses().iter().map(|s| s.weight).collect(),
            })
            .collect()
    }

    /// Index of the synapse of neuron `j` fed by input `i`, if connected.
    pub fn slot(&self, j: usize, input: u32) -> Option<usize> {
        match self.slots[j * self.config.n_inputs + input as usize] {
            NO_SLOT => None,
            k => Some(k as usize),
        }
    }

    fn delivered_weight(&self, j: usize, k: usize) -> f64 {
        match &self.config.rule {
            PlasticityRule::Scobul(p) => self.neurons[j].weight(k, p),
            PlasticityRule::Stdp(_) => self.neurons[j].synapses[k].weight,
        }
    }

    /// Advances the network by one step. `t` must equal [`Network::now`].
    /// Returns the ids of the neurons that fired.
    pub fn step(&mut self, input_spikes: &[u32], t: Timestep) -> &[u32] {
        assert_eq!(t, self.now, "steps must advance one at a time");
        let n = self.config.n_neurons;
        let n_in = self.config.n_inputs;

        // delivery: input spikes now, lateral inhibition from the previous step
        for j in 0..n {
            let row = &self.slots[j * n_in..(j + 1) * n_in];
            let mut sum = 0.0;
            for &i in input_spikes {
                let k = row[i as usize];
                if k != NO_SLOT {
                    sum += self.delivered_weight(j, k as usize);
                }
            }
            self.input_sums[j] = sum;
        }
        for &f in &self.fired_prev {
            let f = f as usize;
            for j in 0..n {
                if j != f {
                    let k = self.neurons[j].n_plastic + if f < j { f } else { f - 1 };
                    self.input_sums[j] += self.neurons[j].synapses[k].weight;
                }
            }
        }

        self.fired_now.clear();
        for (j, neuron) in self.neurons.iter_mut().enumerate() {
            if neuron.integrate_step(self.input_sums[j], t) {
                self.fired_now.push(j as u32);
            }
        }

        if self.plasticity_on {
            self.apply_plasticity(input_spikes, t);
        }

        std::mem::swap(&mut self.fired_prev, &mut self.fired_now);
        self.now = t + 1;
        &self.fired_prev
    }

    fn apply_plasticity(&mut self, input_spikes: &[u32], t: Timestep) {
        let n_in = self.config.n_inputs;
        match self.config.rule {
            PlasticityRule::Scobul(p) => {
                for neuron in &mut self.neurons {
                    if let Some(closed) = plasticity::close_if_expired(neuron, t, &p) {
                        if let Some(tr) = &mut self.trace {
                            record_close(tr, &closed, t);
                        }
                    }
                }
                for &f in &self.fired_now {
                    let neuron = &mut self.neurons[f as usize];
                    if let Some(out) = plasticity::on_post_spike(neuron, t, &p) {
                        if let Some(tr) = &mut self.trace {
                            if let Some(closed) = &out.closed_previous {
                                record_close(tr, closed, t);
                            }
                            tr.push(TraceEvent::PeriodOpened { neuron: f, center: t });
                            for &k in &out.potentiated {
                                tr.push(TraceEvent::Potentiated { neuron: f, synapse: k, t, center: t });
                            }
                        }
                    }
                }
                for (j, neuron) in self.neurons.iter_mut().enumerate() {
                    let row = &self.slots[j * n_in..(j + 1) * n_in];
                    for &i in input_spikes {
                        let k = row[i as usize];
                        if k == NO_SLOT {
                            continue;
                        }
                        let out = plasticity::on_pre_spike(neuron, k as usize, t, &p)
                            .expect("input slots only index plastic synapses");
                        if let Some(tr) = &mut self.trace {
                            if out.depression.is_some() {
                                tr.push(TraceEvent::PreDepressed { neuron: j as u32, synapse: k as usize, t });
                            }
                            if out.potentiation.is_some() {
                                let center = neuron.period_center.unwrap();
                                tr.push(TraceEvent::Potentiated { neuron: j as u32, synapse: k as usize, t, center });
                            }
                        }
                    }
                }
                if let RenormMode::Periodic { interval } = p.renorm {
                    if (t + 1) % interval == 0 {
                        for neuron in &mut self.neurons {
                            plasticity::periodic_renormalize(neuron, &p);
                        }
                    }
                }
            }
            PlasticityRule::Stdp(p) => {
                for &f in &self.fired_now {
                    plasticity::stdp_on_post_spike(&mut self.neurons[f as usize], t, &p);
                }
                for (j, neuron) in self.neurons.iter_mut().enumerate() {
                    let row = &self.slots[j * n_in..(j + 1) * n_in];
                    for &i in input_spikes {
                        let k = row[i as usize];
                        if k != NO_SLOT {
                            plasticity::stdp_on_pre_spike(neuron, k as usize, t, &p)
                                .expect("input slots only index plastic synapses");
                        }
                    }
                }
            }
        }
    }

    /// Rebuilds every neuron whose silence has reached the death threshold.
    /// Only acts while plasticity is on, so frozen phases keep the network fixed.
    pub fn death_rebirth_scan(&mut self, t: Timestep) -> Vec<u32> {
        let Some(limit) = self.config.death_silence_threshold else {
            return Vec::new();
        };
        if !self.plasticity_on {
            return Vec::new();
        }
        let mut reborn = Vec::new();
        for j in 0..self.neurons.len() {
            if self.neurons[j].silence_counter >= limit {
                self.rebuild(j);
                reborn.push(j as u32);
                if let Some(tr) = &mut self.trace {
                    tr.push(TraceEvent::Reborn { neuron: j as u32, t });
                }
            }
        }
        self.rebirths += reborn.len() as u64;
        reborn
    }

    fn rebuild(&mut self, j: usize) {
        let n_in = self.config.n_inputs;
        for slot in &mut self.slots[j * n_in..(j + 1) * n_in] {
            *slot = NO_SLOT;
        }
        let plastic = draw_plastic(&self.config, &mut self.rng);
        for (k, s) in plastic.iter().enumerate() {
            self.slots[j * n_in + s.source as usize] = k as u32;
        }
        let old = &self.neurons[j];
        let inhibitory = old.inhibitory_synapses().to_vec();
        let live = old.live_weights;
        let mut fresh = Neuron::new(j as u32, &self.config.neuron, plastic, inhibitory);
        fresh.live_weights = live;
        self.neurons[j] = fresh;
    }

    /// Runs `duration` steps from [`Network::now`] and returns every spike
    /// (inputs and neurons) in time order.
    pub fn run<S: SignalSource + ?Sized>(
        &mut self,
        source: &mut S,
        duration: Timestep,
        plasticity_on: bool,
    ) -> Result<Vec<SpikeRecord>, Error> {
        let mut log = Vec::new();
        self.run_with(source, duration, plasticity_on, |t, inputs, fired| {
            log.extend(inputs.iter().map(|&i| SpikeRecord { t, source: SpikeSource::Input(i) }));
            log.extend(fired.iter().map(|&j| SpikeRecord { t, source: SpikeSource::Neuron(j) }));
        })?;
        Ok(log)
    }

    /// Like [`Network::run`] but hands each step's input spikes and firings to
    /// `observe` instead of building a log.
    pub fn run_with<S, F>(
        &mut self,
        source: &mut S,
        duration: Timestep,
        plasticity_on: bool,
        mut observe: F,
    ) -> Result<(), Error>
    where
        S: SignalSource + ?Sized,
        F: FnMut(Timestep, &[u32], &[u32]),
    {
        if source.n_channels() != self.config.n_inputs {
            return Err(Error::invalid(
                "network.n_inputs",
                format!("network has {} inputs but the signal has {} channels", self.config.n_inputs, source.n_channels()),
            ));
        }
        self.set_plasticity(plasticity_on);
        let start = self.now;
        let mut spikes = Vec::new();
        for t in start..start + duration {
            spikes.clear();
            if !source.fill_step(t, &mut spikes) {
                return Err(Error::SignalExhausted { steps: t - start, needed: duration });
            }
            let fired = self.step(&spikes, t);
            observe(t, &spikes, fired);
            self.death_rebirth_scan(t);
        }
        Ok(())
    }
}

fn draw_plastic(config: &NetworkConfig, rng: &mut Rng) -> Vec<Synapse> {
    let k = config.synapses_per_neuron();
    let mut chosen = index::sample(rng, config.n_inputs, k).into_vec();
    chosen.sort_unstable();
    let (lo, hi) = config.initial_resource;
    chosen
        .into_iter()
        .map(|i| {
            let r = if hi > lo { rng.random_range(lo..hi) } else { lo };
            Synapse::plastic(i as u32, r, config.rule.initial_weight(r))
        })
        .collect()
}

fn record_close(tr: &mut Vec<TraceEvent>, closed: &plasticity::ClosedPeriod, t: Timestep) {
    let neuron = closed.event.neuron_id;
    let center = closed.event.center;
    tr.push(TraceEvent::PeriodClosed { neuron, center, at: t });
    for &(k, before, _) in &closed.depressions {
        tr.push(TraceEvent::SilentDepressed { neuron, synapse: k, t, center, resource_before: before });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::siggen::EventStream;

    pub(crate) fn scobul_config() -> NetworkConfig {
        NetworkConfig {
            n_inputs: 100,
            n_neurons: 10,
            input_connectivity: 1.0,
            initial_resource: (0.0, 1.0),
            inhibitory_weight: -10.0,
            death_silence_threshold: None,
            neuron: NeuronParams { threshold: 1.0, tau_m: 20.0, refractory: 2 },
            rule: PlasticityRule::Scobul(PlasticityParams {
                w_min: 0.0,
                w_max: 0.5,
                tau_p: 10,
                d: 0.01,
                d_plus: 0.05,
                d_minus: 0.02,
                renorm: RenormMode::Immediate,
            }),
            seed: 11,
        }
    }

    #[test]
    fn synapse_counts() {
        let net = Network::build_wta(scobul_config()).unwrap();
        for n in net.neurons() {
            assert_eq!(n.n_plastic(), 100);
            assert_eq!(n.inhibitory_synapses().len(), 9);
        }
        let mut cfg = scobul_config();
        cfg.input_connectivity = 0.5;
        let net = Network::build_wta(cfg).unwrap();
        assert!(net.neurons().iter().all(|n| n.n_plastic() == 50));
    }

    #[test]
    fn rejects_single_neuron() {
        let mut cfg = scobul_config();
        cfg.n_neurons = 1;
        assert!(Network::build_wta(cfg).is_err());
    }

    #[test]
    fn same_seed_same_network() {
        let a = Network::build_wta(scobul_config()).unwrap();
        let b = Network::build_wta(scobul_config()).unwrap();
        assert_eq!(a.neurons(), b.neurons());
        let mut cfg = scobul_config();
        cfg.seed = 12;
        let c = Network::build_wta(cfg).unwrap();
        assert_ne!(a.neurons(), c.neurons());
    }

    #[test]
    fn lateral_inhibition_blocks_next_step() {
        let mut cfg = scobul_config();
        cfg.n_inputs = 1;
        cfg.n_neurons = 2;
        cfg.neuron.tau_m = 1e9;
        let mut net = Network::build_wta(cfg).unwrap();
        net.set_plasticity(false);
        // neuron 0 fires at t=0
        net.neurons_mut()[0].potential = 5.0;
        net.neurons_mut()[0].threshold = 1.0;
        let fired = net.step(&[], 0).to_vec();
        assert_eq!(fired, vec![0]);
        // neuron 1 sits at 0.9 and gets +0.5 at t=1 but also the -10 from neuron 0
        net.neurons_mut()[1].potential = 0.9;
        let leak = net.neurons()[1].leak_factor;
        let w = net.delivered_weight(1, 0);
        let fired = net.step(&[0], 1).to_vec();
        assert!(fired.is_empty());
        let v = net.neurons()[1].potential;
        assert!((v - (leak * 0.9 + w - 10.0)).abs() < 1e-12);
    }

    #[test]
    fn silent_input_silent_network() {
        let mut net = Network::build_wta(scobul_config()).unwrap();
        for t in 0..100 {
            assert!(net.step(&[], t).is_empty());
        }
    }

    #[test]
    fn rebirth_after_threshold() {
        let mut cfg = scobul_config();
        cfg.death_silence_threshold = Some(50);
        let mut net = Network::build_wta(cfg).unwrap();
        let before = net.neurons()[3].clone();
        for t in 0..49 {
            net.step(&[], t);
            assert!(net.death_rebirth_scan(t).is_empty());
        }
        net.step(&[], 49);
        let reborn = net.death_rebirth_scan(49);
        assert_eq!(reborn.len(), 10);
        let after = &net.neurons()[3];
        assert_eq!(after.inhibitory_synapses(), before.inhibitory_synapses());
        assert_eq!(after.silence_counter, 0);
        assert_ne!(after.plastic_synapses(), before.plastic_synapses());
        assert!((after.initial_total() - after.total_resource()).abs() < 1e-12);
    }

    #[test]
    fn recently_fired_neuron_survives() {
        let mut cfg = scobul_config();
        cfg.death_silence_threshold = Some(5);
        let mut net = Network::build_wta(cfg).unwrap();
        net.neurons_mut()[0].silence_counter = 4;
        net.neurons_mut()[0].potential = 10.0;
        net.step(&[], 0);
        assert_eq!(net.neurons()[0].silence_counter, 0);
        assert!(!net.death_rebirth_scan(0).contains(&0));
    }

    #[test]
    fn run_zero_duration_is_empty() {
        let mut net = Network::build_wta(scobul_config()).unwrap();
        let stream = EventStream::new(100);
        let mut src = stream.replay();
        assert!(net.run(&mut src, 0, true).unwrap().is_empty());
    }

    #[test]
    fn exhausted_source_reports_step() {
        let mut net = Network::build_wta(scobul_config()).unwrap();
        let stream = EventStream::from_steps(100, vec![vec![1, 2]; 5]);
        let mut src = stream.replay();
        match net.run(&mut src, 10, true) {
            Err(Error::SignalExhausted { steps, needed }) => assert_eq!((steps, needed), (5, 10)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
