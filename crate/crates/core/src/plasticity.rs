//! Spike-driven plasticity: the resource rules and a classic STDP baseline.
//!
//! The resource rules act on the synaptic resource `W` of excitatory synapses:
//!
//! * unconditional depression: a presynaptic spike lowers `W` by `d`, at most
//!   once per `2 * tau_p` per synapse;
//! * symmetric potentiation: the first presynaptic spike inside a plasticity
//!   period raises `W` by `d_plus`, whether it came before or after the
//!   postsynaptic spike that opened the period;
//! * silent-synapse depression: when a period ends, every synapse with `W > 0`
//!   that saw no spike during it loses `d_minus`;
//! * conservation: each change is compensated by equal and opposite shares on
//!   the neuron's other plastic synapses, keeping the neuron's total fixed.
//!
//! A plasticity period is `[c - tau_p, c + tau_p]` around a postsynaptic spike
//! at `c`, opened only if `c` is at least `tau_p` after the previous center.
//!
//! Inhibitory synapses are never touched by anything in this module.

use serde::{Deserialize, Serialize};

use crate::neuron::{Neuron, PlasticityParams, RenormMode};
use crate::{Error, Timestep};

/// A plasticity period opened by a postsynaptic spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodEvent {
    pub neuron_id: u32,
    pub center: Timestep,
    pub start: Timestep,
    pub end: Timestep,
}

impl PeriodEvent {
    fn new(neuron_id: u32, center: Timestep, tau_p: Timestep) -> Self {
        Self { neuron_id, center, start: center.saturating_sub(tau_p), end: center + tau_p }
    }
}

/// Resource deltas caused by one presynaptic spike on its own synapse.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PreSpikeOutcome {
    pub depression: Option<f64>,
    pub potentiation: Option<f64>,
}

/// Result of closing a plasticity period.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedPeriod {
    pub event: PeriodEvent,
    /// `(synapse index, resource before, delta)` for every silent-synapse depression.
    pub depressions: Vec<(usize, f64, f64)>,
}

/// Result of a postsynaptic spike that opened a new period.
#[derive(Debug, Clone, PartialEq)]
pub struct PostSpikeOutcome {
    pub period: PeriodEvent,
    pub closed_previous: Option<ClosedPeriod>,
    /// Synapses potentiated retroactively (presynaptic spike in `[t - tau_p, t]`).
    pub potentiated: Vec<usize>,
}

#[inline]
fn apply_delta(neuron: &mut Neuron, k: usize, delta: f64, params: &PlasticityParams) {
    neuron.synapses[k].resource += delta;
    rebalance(neuron, k, delta, params);
}

/// Spreads `-delta` in equal shares over the other plastic synapses of the
/// neuron, so that the total resource stays where it was before `delta` was
/// applied to synapse `source`.
///
/// The shares are kept as a neuron-wide offset, so the cost does not depend
/// on the number of synapses. In periodic mode nothing happens here; the
/// drift is settled by [`periodic_renormalize`]. With a single plastic
/// synapse conservation is impossible and the call is a no-op.
#[inline]
pub fn rebalance(neuron: &mut Neuron, source: usize, delta: f64, params: &PlasticityParams) {
    if delta == 0.0 || params.renorm != RenormMode::Immediate || neuron.n_plastic < 2 {
        return;
    }
    let share = delta / (neuron.n_plastic - 1) as f64;
    neuron.synapses[source].resource += share;
    neuron.resource_offset -= share;
}

/// Presynaptic spike arriving on plastic synapse `k` at step `t`.
pub fn on_pre_spike(
    neuron: &mut Neuron,
    k: usize,
    t: Timestep,
    params: &PlasticityParams,
) -> Result<PreSpikeOutcome, Error> {
    if !neuron.synapses[k].is_plastic() {
        return Err(Error::NotPlastic { neuron: neuron.id, synapse: k });
    }
    let mut out = PreSpikeOutcome::default();

    let clock_free = match neuron.synapses[k].last_depression {
        None => true,
        Some(last) => t.saturating_sub(last) >= 2 * params.tau_p,
    };
    if clock_free {
        neuron.synapses[k].last_depression = Some(t);
        apply_delta(neuron, k, -params.d, params);
        out.depression = Some(-params.d);
    }

    if let (Some(center), Some(_)) = (neuron.period_center, neuron.period_open_until) {
        if center <= t && t <= center + params.tau_p {
            if !neuron.synapses[k].potentiated_this_period {
                neuron.synapses[k].potentiated_this_period = true;
                apply_delta(neuron, k, params.d_plus, params);
                out.potentiation = Some(params.d_plus);
            }
            neuron.synapses[k].spiked_this_period = true;
        }
    }

    neuron.synapses[k].last_pre_spike = Some(t);
    Ok(out)
}

/// Postsynaptic spike at step `t`. Opens a new plasticity period if the
/// previous center is at least `tau_p` back, closing a still-open previous
/// period first; returns `None` when the spike is inside the gate.
pub fn on_post_spike(
    neuron: &mut Neuron,
    t: Timestep,
    params: &PlasticityParams,
) -> Option<PostSpikeOutcome> {
    if let Some(center) = neuron.period_center {
        if t < center + params.tau_p {
            return None;
        }
    }
    let closed_previous = close_period(neuron, params);

    let period = PeriodEvent::new(neuron.id, t, params.tau_p);
    neuron.period_center = Some(t);
    neuron.period_open_until = Some(period.end);

    let mut potentiated = Vec::new();
    for k in 0..neuron.n_plastic {
        let recent = matches!(neuron.synapses[k].last_pre_spike, Some(p) if p + params.tau_p >= t && p <= t);
        if recent {
            let s = &mut neuron.synapses[k];
            s.spiked_this_period = true;
            let first = !s.potentiated_this_period;
            s.potentiated_this_period = true;
            if first {
                apply_delta(neuron, k, params.d_plus, params);
                potentiated.push(k);
            }
        }
    }

    Some(PostSpikeOutcome { period, closed_previous, potentiated })
}

/// Ends the neuron's open plasticity period, if any: every plastic synapse
/// with positive resource and no spike during the period loses `d_minus`
/// (eligibility is decided on the resources before any of these changes).
/// All per-period flags are cleared.
pub fn close_period(neuron: &mut Neuron, params: &PlasticityParams) -> Option<ClosedPeriod> {
    neuron.period_open_until?;
    let center = neuron.period_center.expect("open period without a center");
    neuron.period_open_until = None;

    neuron.fold_offset();
    let eligible: Vec<(usize, f64)> = neuron.synapses[..neuron.n_plastic]
        .iter()
        .enumerate()
        .filter(|(_, s)| s.resource > 0.0 && !s.spiked_this_period)
        .map(|(k, s)| (k, s.resource))
        .collect();

    let mut depressions = Vec::with_capacity(eligible.len());
    if params.d_minus > 0.0 {
        for (k, before) in eligible {
            apply_delta(neuron, k, -params.d_minus, params);
            depressions.push((k, before, -params.d_minus));
        }
    }
    for s in &mut neuron.synapses[..neuron.n_plastic] {
        s.potentiated_this_period = false;
        s.spiked_this_period = false;
    }
    neuron.fold_offset();

    Some(ClosedPeriod { event: PeriodEvent::new(neuron.id, center, params.tau_p), depressions })
}

/// Closes the period if its end lies before step `t`.
pub fn close_if_expired(neuron: &mut Neuron, t: Timestep, params: &PlasticityParams) -> Option<ClosedPeriod> {
    match neuron.period_open_until {
        Some(end) if end < t => close_period(neuron, params),
        _ => None,
    }
}

/// Periodic-mode settlement: restores the neuron's plastic resource total to
/// its initial value by a uniform additive correction and recomputes every
/// weight cache. No-op in immediate mode.
pub fn periodic_renormalize(neuron: &mut Neuron, params: &PlasticityParams) {
    if params.renorm == RenormMode::Immediate || neuron.n_plastic == 0 {
        return;
    }
    neuron.fold_offset();
    let drift = neuron.total_resource() - neuron.initial_total;
    if drift != 0.0 {
        let corr = drift / neuron.n_plastic as f64;
        for s in &mut neuron.synapses[..neuron.n_plastic] {
            s.resource -= corr;
        }
    }
    neuron.refresh_weights(params);
}

// ---------------------------------------------------------------------------
// Classic STDP baseline

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdpPairing {
    /// Each spike pairs only with the latest spike of the other side.
    #[default]
    NearestNeighbor,
    /// Every pre/post pair contributes (exponential traces).
    AllPairs,
}

/// Additive pair-based STDP with hard bounds `[0, w_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StdpParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub w_max: f64,
    #[serde(default)]
    pub pairing: StdpPairing,
}

impl StdpParams {
    pub fn validate(&self) -> Result<(), Error> {
        let all_positive = [self.a_plus, self.a_minus, self.tau_plus, self.tau_minus, self.w_max]
            .iter()
            .all(|v| *v > 0.0);
        if all_positive {
            Ok(())
        } else {
            Err(Error::invalid("stdp", "a_plus, a_minus, tau_plus, tau_minus and w_max must be positive"))
        }
    }
}

/// Weight change produced by one pre/post pair, given the current weight.
///
/// `dt = t_post - t_pre`; positive `dt` potentiates by `a_plus * exp(-dt / tau_plus)`
/// (capped at `w_max`), negative `dt` depresses by `a_minus * exp(dt / tau_minus)`
/// (floored at 0), `dt = 0` is neutral.
pub fn stdp_baseline_update(weight: f64, t_pre: Timestep, t_post: Timestep, params: &StdpParams) -> f64 {
    if t_post > t_pre {
        let dt = (t_post - t_pre) as f64;
        (weight + params.a_plus * (-dt / params.tau_plus).exp()).min(params.w_max) - weight
    } else if t_post < t_pre {
        let dt = (t_pre - t_post) as f64;
        (weight - params.a_minus * (-dt / params.tau_minus).exp()).max(0.0) - weight
    } else {
        0.0
    }
}

/// Presynaptic spike under the STDP baseline: depression against the
/// preceding postsynaptic activity. Returns the weight delta applied.
pub fn stdp_on_pre_spike(neuron: &mut Neuron, k: usize, t: Timestep, params: &StdpParams) -> Result<f64, Error> {
    if !neuron.synapses[k].is_plastic() {
        return Err(Error::NotPlastic { neuron: neuron.id, synapse: k });
    }
    let delta = match params.pairing {
        StdpPairing::NearestNeighbor => match neuron.last_fire {
            Some(tf) => stdp_baseline_update(neuron.synapses[k].weight, t, tf, params),
            None => 0.0,
        },
        StdpPairing::AllPairs => {
            let (trace, at) = neuron.post_trace;
            let mut x = trace * (-((t - at) as f64) / params.tau_minus).exp();
            if neuron.last_fire == Some(t) {
                // the same-step postsynaptic spike is a dt = 0 pair
                x -= 1.0;
            }
            let w = neuron.synapses[k].weight;
            (w - params.a_minus * x.max(0.0)).max(0.0) - w
        }
    };
    let s = &mut neuron.synapses[k];
    s.weight += delta;
    if params.pairing == StdpPairing::AllPairs {
        let decayed = match s.last_pre_spike {
            Some(p) => s.trace * (-((t - p) as f64) / params.tau_plus).exp(),
            None => 0.0,
        };
        s.trace = decayed + 1.0;
    }
    s.last_pre_spike = Some(t);
    Ok(delta)
}

/// Postsynaptic spike under the STDP baseline: potentiation of every plastic
/// synapse against its preceding presynaptic activity.
pub fn stdp_on_post_spike(neuron: &mut Neuron, t: Timestep, params: &StdpParams) {
    let n = neuron.n_plastic;
    match params.pairing {
        StdpPairing::NearestNeighbor => {
            for s in &mut neuron.synapses[..n] {
                if let Some(tp) = s.last_pre_spike {
                    s.weight += stdp_baseline_update(s.weight, tp, t, params);
                }
            }
        }
        StdpPairing::AllPairs => {
            for s in &mut neuron.synapses[..n] {
                match s.last_pre_spike {
                    Some(tp) if tp < t => {
                        let x = s.trace * (-((t - tp) as f64) / params.tau_plus).exp();
                        s.weight = (s.weight + params.a_plus * x).min(params.w_max);
                    }
                    _ => {}
                }
            }
            let (trace, at) = neuron.post_trace;
            neuron.post_trace = (trace * (-((t - at) as f64) / params.tau_minus).exp() + 1.0, t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::{NeuronParams, Synapse};

    fn params(tau_p: Timestep) -> PlasticityParams {
        PlasticityParams {
            w_min: 0.0,
            w_max: 1.0,
            tau_p,
            d: 0.3,
            d_plus: 0.5,
            d_minus: 0.2,
            renorm: RenormMode::Immediate,
        }
    }

    fn neuron_with(resources: &[f64], n_inhib: usize) -> Neuron {
        let np = NeuronParams { threshold: 1.0, tau_m: 20.0, refractory: 0 };
        let plastic = resources.iter().enumerate().map(|(i, &r)| Synapse::plastic(i as u32, r, 0.0)).collect();
        let inhib = (0..n_inhib).map(|i| Synapse::inhibitory(100 + i as u32, -2.0)).collect();
        Neuron::new(7, &np, plastic, inhib)
    }

    fn resources(n: &Neuron) -> Vec<f64> {
        (0..n.n_plastic()).map(|k| n.resource(k)).collect()
    }

    #[test]
    fn pre_depression_respects_window() {
        let p = params(10);
        let mut n = neuron_with(&[1.0, 1.0], 0);
        n.synapses[0].last_depression = Some(99);
        let out = on_pre_spike(&mut n, 0, 100, &p).unwrap();
        assert_eq!(out.depression, None);
        assert_eq!(resources(&n), vec![1.0, 1.0]);
    }

    #[test]
    fn pre_depression_fresh_synapse() {
        let p = params(10);
        let mut n = neuron_with(&[1.0, 1.0, 1.0], 0);
        let out = on_pre_spike(&mut n, 0, 100, &p).unwrap();
        assert_eq!(out.depression, Some(-0.3));
        let r = resources(&n);
        assert!((r[0] - 0.7).abs() < 1e-12);
        assert!((r[1] - 1.15).abs() < 1e-12 && (r[2] - 1.15).abs() < 1e-12);
        assert!((n.total_resource() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn first_spike_in_period_potentiates_once() {
        let mut p = params(10);
        p.d = 0.0;
        let mut n = neuron_with(&[1.0, 1.0], 0);
        assert!(on_post_spike(&mut n, 50, &p).is_some());
        let a = on_pre_spike(&mut n, 0, 52, &p).unwrap();
        let b = on_pre_spike(&mut n, 0, 55, &p).unwrap();
        assert_eq!(a.potentiation, Some(0.5));
        assert_eq!(b.potentiation, None);
    }

    #[test]
    fn retroactive_potentiation() {
        let mut p = params(10);
        p.d = 0.0;
        let mut n = neuron_with(&[1.0, 1.0], 0);
        on_pre_spike(&mut n, 0, 48, &p).unwrap();
        let out = on_post_spike(&mut n, 50, &p).unwrap();
        assert_eq!(out.potentiated, vec![0]);
        assert!((n.resource(0) - 1.5).abs() < 1e-12);
        assert!((n.resource(1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn period_gate() {
        let p = params(10);
        let mut n = neuron_with(&[1.0, 1.0], 0);
        on_post_spike(&mut n, 45, &p).unwrap();
        assert!(on_post_spike(&mut n, 50, &p).is_none());
        let out = on_post_spike(&mut n, 56, &p).unwrap();
        assert_eq!((out.period.start, out.period.center, out.period.end), (46, 56, 66));
        assert!(out.closed_previous.is_some());
    }

    #[test]
    fn close_period_cases() {
        let mut p = params(10);
        p.d = 0.0;
        p.d_minus = 0.1;
        // synapse 0: W=0.5 silent, synapse 1: W=-0.2 silent, synapse 2: W=0.5 spiked
        let mut n = neuron_with(&[0.5, -0.2, 0.5], 0);
        on_post_spike(&mut n, 10, &p).unwrap();
        // spike on synapse 2 inside the period, then flatten its potentiation away
        on_pre_spike(&mut n, 2, 12, &p).unwrap();
        let before = resources(&n);
        let closed = close_period(&mut n, &p).unwrap();
        let hit: Vec<usize> = closed.depressions.iter().map(|d| d.0).collect();
        assert_eq!(hit, vec![0]);
        let after = resources(&n);
        assert!((after[0] - (before[0] - 0.1)).abs() < 1e-12);
        assert!((after[1] - (before[1] + 0.05)).abs() < 1e-12);
        assert!(n.synapses().iter().all(|s| !s.spiked_this_period && !s.potentiated_this_period));
        assert!(close_period(&mut n, &p).is_none());
    }

    #[test]
    fn rebalance_examples() {
        let p = params(10);
        let mut n = neuron_with(&[2.0, 0.0], 0);
        n.synapses[0].resource += 0.4;
        rebalance(&mut n, 0, 0.4, &p);
        let r = resources(&n);
        assert!((r[0] - 2.4).abs() < 1e-12 && (r[1] + 0.4).abs() < 1e-12);

        let mut n = neuron_with(&[1.0, 1.0], 0);
        rebalance(&mut n, 0, 0.0, &p);
        assert_eq!(resources(&n), vec![1.0, 1.0]);

        let mut single = neuron_with(&[1.0], 0);
        single.synapses[0].resource += 0.4;
        rebalance(&mut single, 0, 0.4, &p);
        assert!((single.resource(0) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn periodic_mode_settles_drift() {
        let mut p = params(10);
        p.renorm = RenormMode::Periodic { interval: 1000 };
        let mut n = neuron_with(&[0.75, 0.75, 0.75, 0.75], 0);
        n.synapses[0].resource += 0.3;
        rebalance(&mut n, 0, 0.3, &p);
        assert!((n.total_resource() - 3.3).abs() < 1e-12);
        periodic_renormalize(&mut n, &p);
        let r = resources(&n);
        assert!((r[0] - (1.05 - 0.075)).abs() < 1e-12);
        assert!((r[1] - (0.75 - 0.075)).abs() < 1e-12);
        assert!((n.total_resource() - 3.0).abs() < 1e-12);
        assert_eq!(n.synapses[1].weight, p.weight_of(r[1]));

        // immediate mode: no-op
        let p = params(10);
        let mut n = neuron_with(&[1.0, 2.0], 0);
        n.synapses[0].resource += 1.0;
        periodic_renormalize(&mut n, &p);
        assert_eq!(resources(&n), vec![2.0, 2.0]);
    }

    #[test]
    fn inhibitory_synapse_rejected() {
        let p = params(10);
        let mut n = neuron_with(&[1.0, 1.0], 2);
        assert!(matches!(on_pre_spike(&mut n, 2, 0, &p), Err(Error::NotPlastic { .. })));
        let sp = StdpParams { a_plus: 0.1, a_minus: 0.1, tau_plus: 10.0, tau_minus: 10.0, w_max: 1.0, pairing: StdpPairing::NearestNeighbor };
        assert!(stdp_on_pre_spike(&mut n, 3, 0, &sp).is_err());
    }

    #[test]
    fn stdp_pair_examples() {
        let sp = StdpParams { a_plus: 0.1, a_minus: 0.12, tau_plus: 20.0, tau_minus: 20.0, w_max: 1.0, pairing: StdpPairing::NearestNeighbor };
        let d = stdp_baseline_update(0.5, 100, 120, &sp);
        assert!((d - 0.1 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(stdp_baseline_update(0.95, 100, 101, &sp), 1.0 - 0.95);
        assert_eq!(stdp_baseline_update(0.5, 100, 100, &sp), 0.0);
        assert_eq!(stdp_baseline_update(0.0, 120, 100, &sp), 0.0);
        let d = stdp_baseline_update(0.5, 110, 100, &sp);
        assert!((d + 0.12 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn stdp_all_pairs_sums_pairs() {
        let sp = StdpParams { a_plus: 0.1, a_minus: 0.1, tau_plus: 10.0, tau_minus: 10.0, w_max: 10.0, pairing: StdpPairing::AllPairs };
        let mut n = neuron_with(&[0.0], 0);
        n.synapses[0].weight = 1.0;
        stdp_on_pre_spike(&mut n, 0, 0, &sp).unwrap();
        stdp_on_pre_spike(&mut n, 0, 5, &sp).unwrap();
        n.last_fire = Some(10);
        stdp_on_post_spike(&mut n, 10, &sp);
        let expected = 1.0 + 0.1 * ((-1.0f64).exp() + (-0.5f64).exp());
        assert!((n.synapses[0].weight - expected).abs() < 1e-12);
    }
}
