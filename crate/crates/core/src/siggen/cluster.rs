//! Poisson background with randomly switched node clusters.
//!
//! Every node spikes with probability `p0` per step. Cluster `i` is idle until
//! a per-step Bernoulli draw with probability `activation_prob` switches it on;
//! it then stays active for `duration` steps, during which each of its nodes
//! spikes with probability `p0 + rate` (rates of simultaneously active
//! clusters sharing a node add up, clipped at 1). The cluster can switch on
//! again on the step after its interval ends.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{EventStream, SignalSource};
use crate::rng::{self, Rng};
use crate::{Error, Timestep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub nodes: Vec<u32>,
    /// Per-step probability of switching on while idle.
    pub activation_prob: f64,
    /// Active interval length in steps.
    pub duration: Timestep,
    /// Extra spike probability of member nodes while active.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSignalSpec {
    pub n_nodes: usize,
    pub p0: f64,
    pub clusters: Vec<ClusterSpec>,
    pub seed: u64,
}

impl ClusterSignalSpec {
    /// `n_clusters` disjoint clusters of `size` consecutive nodes each.
    pub fn disjoint(
        n_nodes: usize,
        n_clusters: usize,
        size: usize,
        p0: f64,
        activation_prob: f64,
        duration: Timestep,
        rate: f64,
        seed: u64,
    ) -> Self {
        let clusters = (0..n_clusters)
            .map(|c| ClusterSpec {
                nodes: ((c * size) as u32..((c + 1) * size) as u32).collect(),
                activation_prob,
                duration,
                rate,
            })
            .collect();
        Self { n_nodes, p0, clusters, seed }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(Error::invalid("signal.p0", "must be a probability"));
        }
        for (i, c) in self.clusters.iter().enumerate() {
            let key = |f: &str| format!("signal.clusters[{i}].{f}");
            if !(0.0..=1.0).contains(&c.activation_prob) {
                return Err(Error::invalid(key("activation_prob"), "must be a probability"));
            }
            if !(c.rate >= 0.0 && self.p0 + c.rate <= 1.0) {
                return Err(Error::invalid(key("rate"), "need rate >= 0 and p0 + rate <= 1"));
            }
            if c.duration < 1 {
                return Err(Error::invalid(key("duration"), "must be at least 1"));
            }
            if c.nodes.iter().any(|&n| n as usize >= self.n_nodes) {
                return Err(Error::invalid(key("nodes"), "node id out of range"));
            }
        }
        Ok(())
    }
}

/// Activation intervals `[start, end)` of every cluster.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruthLog {
    pub intervals: Vec<Vec<(Timestep, Timestep)>>,
}

impl GroundTruthLog {
    pub fn n_clusters(&self) -> usize {
        self.intervals.len()
    }

    /// Number of activations of cluster `i`.
    pub fn activations(&self, i: usize) -> usize {
        self.intervals[i].len()
    }

    /// Per-step activity mask of cluster `i` over `[0, duration)`.
    pub fn active_mask(&self, i: usize, duration: Timestep) -> Vec<bool> {
        let mut mask = vec![false; duration as usize];
        for &(s, e) in &self.intervals[i] {
            for t in s..e.min(duration) {
                mask[t as usize] = true;
            }
        }
        mask
    }
}

/// Streaming generator; records ground truth as it goes.
#[derive(Debug, Clone)]
pub struct ClusterGenerator {
    spec: ClusterSignalSpec,
    rng: Rng,
    active_until: Vec<Timestep>,
    node_prob: Vec<f64>,
    truth: GroundTruthLog,
    next_t: Timestep,
}

impl ClusterGenerator {
    pub fn new(spec: ClusterSignalSpec) -> Result<Self, Error> {
        spec.validate()?;
        let rng = rng::stream(spec.seed, "signal");
        let n_clusters = spec.clusters.len();
        Ok(Self {
            rng,
            active_until: vec![0; n_clusters],
            node_prob: vec![spec.p0; spec.n_nodes],
            truth: GroundTruthLog { intervals: vec![Vec::new(); n_clusters] },
            next_t: 0,
            spec,
        })
    }

    pub fn ground_truth(&self) -> &GroundTruthLog {
        &self.truth
    }

    pub fn into_ground_truth(self) -> GroundTruthLog {
        self.truth
    }
}

impl SignalSource for ClusterGenerator {
    fn n_channels(&self) -> usize {
        self.spec.n_nodes
    }

    fn fill_step(&mut self, t: Timestep, out: &mut Vec<u32>) -> bool {
        assert_eq!(t, self.next_t, "cluster generator is sequential");
        self.next_t += 1;
        for (i, c) in self.spec.clusters.iter().enumerate() {
            if t >= self.active_until[i] && self.rng.random::<f64>() < c.activation_prob {
                self.active_until[i] = t + c.duration;
                self.truth.intervals[i].push((t, t + c.duration));
            }
        }
        self.node_prob.fill(self.spec.p0);
        for (i, c) in self.spec.clusters.iter().enumerate() {
            if t < self.active_until[i] {
                for &n in &c.nodes {
                    self.node_prob[n as usize] += c.rate;
                }
            }
        }
        for (n, &p) in self.node_prob.iter().enumerate() {
            if self.rng.random::<f64>() < p.min(1.0) {
                out.push(n as u32);
            }
        }
        true
    }
}

/// Generates `duration` steps of the cluster signal.
pub fn gen_cluster_signal(spec: &ClusterSignalSpec, duration: Timestep) -> Result<(EventStream, GroundTruthLog), Error> {
    let mut generator = ClusterGenerator::new(spec.clone())?;
    let stream = EventStream::record(&mut generator, duration);
    Ok((stream, generator.into_ground_truth()))
}
