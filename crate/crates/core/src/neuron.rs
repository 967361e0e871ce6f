//! Leaky integrate-and-fire neurons with current-based delta synapses.
//!
//! One timestep is one millisecond. On every step the membrane potential
//! decays multiplicatively and then receives the sum of the weights of all
//! synapses that got a spike during the step:
//!
//! ```text
//! V <- leak * V + sum(w_k for every synapse k spiking at t)
//! if V >= theta: fire, V <- 0, refractory for `refractory_len` steps
//! ```
//!
//! Excitatory synapses store a *resource* `W` rather than a weight. The weight
//! actually delivered is the saturating map [`resource_to_weight`], so `W` can
//! wander over the whole real line while the weight stays in `[w_min, w_max)`.

use serde::{Deserialize, Serialize};

use crate::Timestep;

/// Saturating map from synaptic resource to synaptic weight.
///
/// `w = w_min + (w_max - w_min) * max(W, 0) / (w_max - w_min + max(W, 0))`
///
/// Every non-positive resource maps to `w_min`; large resources approach but
/// never reach `w_max`.
#[inline]
pub fn resource_to_weight(resource: f64, w_min: f64, w_max: f64) -> f64 {
    let span = w_max - w_min;
    let r = resource.max(0.0);
    w_min + span * r / (span + r)
}

/// How the per-neuron resource conservation and the weight caches are kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RenormMode {
    /// Compensate every resource change on the spot; weights always current.
    Immediate,
    /// Let changes accumulate and restore the total (and recompute weights)
    /// once every `interval` timesteps.
    Periodic { interval: Timestep },
}

/// Constants of the resource plasticity rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasticityParams {
    #[serde(default)]
    pub w_min: f64,
    pub w_max: f64,
    /// Half-length of a plasticity period, in timesteps.
    pub tau_p: Timestep,
    /// Unconditional depression applied to a synapse receiving a spike.
    pub d: f64,
    /// Potentiation for the first spike of a plasticity period.
    pub d_plus: f64,
    /// Depression of strong synapses silent during a whole period.
    pub d_minus: f64,
    #[serde(default = "default_renorm")]
    pub renorm: RenormMode,
}

fn default_renorm() -> RenormMode {
    RenormMode::Immediate
}

impl PlasticityParams {
    pub fn validate(&self) -> Result<(), crate::Error> {
        if !(self.w_min >= 0.0 && self.w_max > self.w_min) {
            return Err(crate::Error::invalid("plasticity.w_max", "need w_max > w_min >= 0"));
        }
        if self.tau_p < 1 {
            return Err(crate::Error::invalid("plasticity.tau_p", "must be at least 1"));
        }
        if self.d < 0.0 || self.d_plus < 0.0 || self.d_minus < 0.0 {
            return Err(crate::Error::invalid("plasticity", "d, d_plus and d_minus must be >= 0"));
        }
        if let RenormMode::Periodic { interval: 0 } = self.renorm {
            return Err(crate::Error::invalid("plasticity.renorm.interval", "must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn weight_of(&self, resource: f64) -> f64 {
        resource_to_weight(resource, self.w_min, self.w_max)
    }
}

/// Membrane parameters shared by every neuron in a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronParams {
    pub threshold: f64,
    /// Membrane time constant in timesteps; the per-step leak is `exp(-1/tau_m)`.
    pub tau_m: f64,
    pub refractory: u32,
}

impl NeuronParams {
    pub fn leak_factor(&self) -> f64 {
        (-1.0 / self.tau_m).exp()
    }

    pub fn validate(&self) -> Result<(), crate::Error> {
        if !(self.threshold > 0.0) {
            return Err(crate::Error::invalid("neuron.threshold", "must be positive"));
        }
        if !(self.tau_m > 0.0) {
            return Err(crate::Error::invalid("neuron.tau_m", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynapseKind {
    ExcitatoryPlastic,
    InhibitoryFixed,
}

/// One synapse and its plasticity bookkeeping.
///
/// For plastic synapses under the resource rules the stored `resource` is only
/// the synapse's local part; the neuron adds a shared offset (see
/// [`Neuron::resource`]). Inhibitory synapses keep their fixed weight in
/// `weight` and are never written after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synapse {
    /// Input node id for plastic synapses, presynaptic neuron id for inhibitory ones.
    pub source: u32,
    pub kind: SynapseKind,
    pub(crate) resource: f64,
    pub(crate) weight: f64,
    pub last_pre_spike: Option<Timestep>,
    pub last_depression: Option<Timestep>,
    pub potentiated_this_period: bool,
    pub spiked_this_period: bool,
    /// Presynaptic trace of the all-pairs STDP baseline, valid at `last_pre_spike`.
    #[serde(default)]
    pub(crate) trace: f64,
}

impl Synapse {
    pub fn plastic(source: u32, resource: f64, weight: f64) -> Self {
        Self {
            source,
            kind: SynapseKind::ExcitatoryPlastic,
            resource,
            weight,
            last_pre_spike: None,
            last_depression: None,
            potentiated_this_period: false,
            spiked_this_period: false,
            trace: 0.0,
        }
    }

    pub fn inhibitory(source: u32, weight: f64) -> Self {
        Self {
            source,
            kind: SynapseKind::InhibitoryFixed,
            resource: 0.0,
            weight,
            last_pre_spike: None,
            last_depression: None,
            potentiated_this_period: false,
            spiked_this_period: false,
            trace: 0.0,
        }
    }

    pub fn is_plastic(&self) -> bool {
        self.kind == SynapseKind::ExcitatoryPlastic
    }

    /// The cached weight. Exact for inhibitory synapses and for the STDP arm;
    /// for resource synapses use [`Neuron::weight`].
    pub fn cached_weight(&self) -> f64 {
        self.weight
    }
}

/// A LIF neuron together with its incoming synapses.
///
/// Plastic synapses occupy indices `0..n_plastic()`, inhibitory ones follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub id: u32,
    pub potential: f64,
    pub threshold: f64,
    pub leak_factor: f64,
    pub refractory_remaining: u32,
    pub refractory_len: u32,
    pub period_center: Option<Timestep>,
    pub period_open_until: Option<Timestep>,
    pub silence_counter: u64,
    pub(crate) synapses: Vec<Synapse>,
    pub(crate) n_plastic: usize,
    /// Resource shared by every plastic synapse (lazy form of the equal-share
    /// compensation); the resource of synapse k is `synapses[k].resource + offset`.
    pub(crate) resource_offset: f64,
    pub(crate) initial_total: f64,
    /// Weight caches follow the resource on every change (immediate mode) or
    /// only at renormalization points (periodic mode).
    pub(crate) live_weights: bool,
    /// Time of the most recent fire, used by the STDP baseline.
    pub last_fire: Option<Timestep>,
    /// Postsynaptic trace of the all-pairs STDP baseline and the step it is valid at.
    #[serde(default)]
    pub(crate) post_trace: (f64, Timestep),
}

impl Neuron {
    /// Builds a neuron from plastic synapses (listed first) and inhibitory ones.
    pub fn new(id: u32, params: &NeuronParams, plastic: Vec<Synapse>, inhibitory: Vec<Synapse>) -> Self {
        let n_plastic = plastic.len();
        let mut synapses = plastic;
        synapses.extend(inhibitory);
        let initial_total = synapses[..n_plastic].iter().map(|s| s.resource).sum();
        Self {
            id,
            potential: 0.0,
            threshold: params.threshold,
            leak_factor: params.leak_factor(),
            refractory_remaining: 0,
            refractory_len: params.refractory,
            period_center: None,
            period_open_until: None,
            silence_counter: 0,
            synapses,
            n_plastic,
            resource_offset: 0.0,
            initial_total,
            live_weights: true,
            last_fire: None,
            post_trace: (0.0, 0),
        }
    }

    pub fn synapses(&self) -> &[Synapse] {
        &self.synapses
    }

    pub fn synapse(&self, k: usize) -> &Synapse {
        &self.synapses[k]
    }

    pub fn n_plastic(&self) -> usize {
        self.n_plastic
    }

    pub fn plastic_synapses(&self) -> &[Synapse] {
        &self.synapses[..self.n_plastic]
    }

    pub fn inhibitory_synapses(&self) -> &[Synapse] {
        &self.synapses[self.n_plastic..]
    }

    /// Current synaptic resource of synapse `k` (0 for inhibitory synapses).
    #[inline]
    pub fn resource(&self, k: usize) -> f64 {
        let s = &self.synapses[k];
        if s.is_plastic() {
            s.resource + self.resource_offset
        } else {
            0.0
        }
    }

    /// Sum of the resources of all plastic synapses.
    pub fn total_resource(&self) -> f64 {
        self.synapses[..self.n_plastic].iter().map(|s| s.resource).sum::<f64>()
            + self.n_plastic as f64 * self.resource_offset
    }

    /// Resource total recorded at construction (the conservation target).
    pub fn initial_total(&self) -> f64 {
        self.initial_total
    }

    /// Weight delivered by synapse `k` under the resource rules.
    #[inline]
    pub fn weight(&self, k: usize, params: &PlasticityParams) -> f64 {
        let s = &self.synapses[k];
        if s.is_plastic() && self.live_weights {
            params.weight_of(s.resource + self.resource_offset)
        } else {
            s.weight
        }
    }

    /// Folds the shared offset into the per-synapse resources.
    pub(crate) fn fold_offset(&mut self) {
        if self.resource_offset != 0.0 {
            let off = self.resource_offset;
            for s in &mut self.synapses[..self.n_plastic] {
                s.resource += off;
            }
            self.resource_offset = 0.0;
        }
    }

    /// Overwrites the resource of a plastic synapse, keeping the conservation
    /// target in step. Meant for setting up states by hand.
    pub fn set_resource(&mut self, k: usize, resource: f64, params: &PlasticityParams) {
        assert!(self.synapses[k].is_plastic(), "synapse {k} is not plastic");
        self.fold_offset();
        self.synapses[k].resource = resource;
        self.synapses[k].weight = params.weight_of(resource);
        self.initial_total = self.total_resource();
    }

    /// Recomputes every plastic weight cache from the current resources.
    pub fn refresh_weights(&mut self, params: &PlasticityParams) {
        let off = self.resource_offset;
        for s in &mut self.synapses[..self.n_plastic] {
            s.weight = params.weight_of(s.resource + off);
        }
    }

    /// One timestep of membrane dynamics. Returns whether the neuron fired.
    pub fn integrate_step(&mut self, weighted_input: f64, t: Timestep) -> bool {
        if self.refractory_remaining > 0 {
            self.refractory_remaining -= 1;
            self.silence_counter += 1;
            return false;
        }
        self.potential = self.leak_factor * self.potential + weighted_input;
        if self.potential >= self.threshold {
            self.potential = 0.0;
            self.refractory_remaining = self.refractory_len;
            self.silence_counter = 0;
            self.last_fire = Some(t);
            true
        } else {
            self.silence_counter += 1;
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> NeuronParams {
        NeuronParams { threshold: 1.0, tau_m: 20.0, refractory: 3 }
    }

    fn bare(threshold: f64) -> Neuron {
        let mut p = params();
        p.threshold = threshold;
        Neuron::new(0, &p, vec![Synapse::plastic(0, 1.0, 0.5)], vec![])
    }

    #[test]
    fn weight_examples() {
        assert_eq!(resource_to_weight(-5.0, 0.0, 1.0), 0.0);
        assert_eq!(resource_to_weight(1.0, 0.0, 1.0), 0.5);
        assert_eq!(resource_to_weight(2.0, 0.0, 2.0), 1.0);
        let w = resource_to_weight(1e12, 0.0, 1.0);
        assert!(w < 1.0 && w > 1.0 - 1e-9);
    }

    #[test]
    fn delta_inputs_sum_before_threshold() {
        let mut n = bare(1.0);
        assert!(n.integrate_step(0.4 + 0.7, 0));
        assert_eq!(n.potential, 0.0);
        assert_eq!(n.refractory_remaining, 3);
        assert_eq!(n.silence_counter, 0);
    }

    #[test]
    fn zero_is_fixed_point() {
        let mut n = bare(1.0);
        for t in 0..10 {
            assert!(!n.integrate_step(0.0, t));
        }
        assert_eq!(n.potential, 0.0);
        assert_eq!(n.silence_counter, 10);
    }

    #[test]
    fn inhibitory_delta_lowers_potential() {
        let mut n = bare(1.0);
        n.potential = 0.5;
        assert!(!n.integrate_step(-0.8, 0));
        let expected = n.leak_factor * 0.5 - 0.8;
        assert_eq!(n.potential, expected);
    }

    #[test]
    fn refractory_blocks_firing() {
        let mut n = bare(1.0);
        assert!(n.integrate_step(2.0, 0));
        for t in 1..=3 {
            assert!(!n.integrate_step(5.0, t));
            assert_eq!(n.potential, 0.0);
        }
        assert!(n.integrate_step(5.0, 4));
    }

    #[test]
    fn saturation_bound_prevents_firing() {
        // theta > n * w_max: even every synapse spiking every step cannot fire.
        let w_max = 1.0;
        let n_inputs = 4;
        let mut n = bare(n_inputs as f64 * w_max + 1e-9);
        // from rest, one step with every input at the supremum of the weight
        assert!(!n.integrate_step(n_inputs as f64 * resource_to_weight(1e300, 0.0, w_max), 0));
    }

    proptest! {
        #[test]
        fn weight_is_monotone(a in -1e6f64..1e6, b in -1e6f64..1e6, w_max in 0.01f64..100.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(resource_to_weight(lo, 0.0, w_max) <= resource_to_weight(hi, 0.0, w_max));
        }

        #[test]
        fn weight_stays_in_range(r in -1e9f64..1e9, w_min in 0.0f64..1.0, span in 0.01f64..10.0) {
            let w = resource_to_weight(r, w_min, w_min + span);
            prop_assert!(w >= w_min && w < w_min + span);
            if r <= 0.0 {
                prop_assert_eq!(w, w_min);
            }
        }

        #[test]
        fn weight_strictly_increasing_above_zero(a in 1e-6f64..1e3, gap in 1e-3f64..1e3) {
            prop_assert!(resource_to_weight(a, 0.0, 1.0) < resource_to_weight(a + gap, 0.0, 1.0));
        }

        #[test]
        fn no_refire_within_refractory(inputs in proptest::collection::vec(0.0f64..3.0, 1..200), refr in 0u32..10) {
            let mut n = bare(1.0);
            n.refractory_len = refr;
            let mut last: Option<u64> = None;
            for (t, x) in inputs.iter().enumerate() {
                if n.integrate_step(*x, t as u64) {
                    if let Some(l) = last {
                        prop_assert!(t as u64 - l > refr as u64);
                    }
                    last = Some(t as u64);
                }
            }
        }
    }
}
