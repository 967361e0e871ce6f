//! Input signal generators.
//!
//! * [`cluster`]: background Poisson noise plus randomly switched clusters of
//!   input nodes with elevated rate, with the activation intervals as ground
//!   truth;
//! * [`dvs`]: a light spot moving across a small field, seen through an
//!   emulated DVS camera with three channels per pixel.
//!
//! Both produce per-step sets of channel ids. A generated signal can be frozen
//! into an [`EventStream`] and replayed any number of times.

pub mod cluster;
pub mod dvs;

pub use cluster::{gen_cluster_signal, ClusterGenerator, ClusterSignalSpec, ClusterSpec, GroundTruthLog};
pub use dvs::{
    calibrate_thresholds, dvs_frame_to_events, gen_dvs_signal, light_spot_scene, DvsConfig, DvsEmulator, DvsSource,
    LightSpotScene, SceneConfig, ScenePhasePoint,
};

use crate::Timestep;

/// Anything that yields the spiking channels of each step.
pub trait SignalSource {
    fn n_channels(&self) -> usize;

    /// Appends the ids of the channels spiking at step `t` to `out`.
    /// Returns `false` once the source has no data for `t`.
    fn fill_step(&mut self, t: Timestep, out: &mut Vec<u32>) -> bool;
}

/// A recorded signal: per-step channel lists in compressed form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventStream {
    n_channels: usize,
    offsets: Vec<usize>,
    ids: Vec<u32>,
}

impl EventStream {
    pub fn new(n_channels: usize) -> Self {
        Self { n_channels, offsets: vec![0], ids: Vec::new() }
    }

    pub fn from_steps(n_channels: usize, steps: Vec<Vec<u32>>) -> Self {
        let mut s = Self::new(n_channels);
        for step in steps {
            s.push_step(&step);
        }
        s
    }

    /// Records a signal by pulling `duration` steps from `source`.
    pub fn record<S: SignalSource + ?Sized>(source: &mut S, duration: Timestep) -> Self {
        let mut s = Self::new(source.n_channels());
        let mut buf = Vec::new();
        for t in 0..duration {
            buf.clear();
            if !source.fill_step(t, &mut buf) {
                break;
            }
            s.push_step(&buf);
        }
        s
    }

    pub fn push_step(&mut self, ids: &[u32]) {
        debug_assert!(ids.iter().all(|&i| (i as usize) < self.n_channels));
        self.ids.extend_from_slice(ids);
        self.offsets.push(self.ids.len());
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    /// Number of recorded steps.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_events(&self) -> usize {
        self.ids.len()
    }

    pub fn step(&self, t: usize) -> &[u32] {
        &self.ids[self.offsets[t]..self.offsets[t + 1]]
    }

    /// All events as `(t, channel)` pairs in time order.
    pub fn events(&self) -> impl Iterator<Item = (Timestep, u32)> + '_ {
        (0..self.len()).flat_map(move |t| self.step(t).iter().map(move |&c| (t as Timestep, c)))
    }

    /// Spike count per channel.
    pub fn channel_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_channels];
        for &c in &self.ids {
            counts[c as usize] += 1;
        }
        counts
    }

    pub fn replay(&self) -> Replay<'_> {
        Replay { stream: self }
    }
}

/// A read-only view that feeds a recorded stream to a network.
#[derive(Debug, Clone, Copy)]
pub struct Replay<'a> {
    stream: &'a EventStream,
}

impl SignalSource for Replay<'_> {
    fn n_channels(&self) -> usize {
        self.stream.n_channels
    }

    fn fill_step(&mut self, t: Timestep, out: &mut Vec<u32>) -> bool {
        if (t as usize) < self.stream.len() {
            out.extend_from_slice(self.stream.step(t as usize));
            true
        } else {
            false
        }
    }
}

impl SignalSource for EventStream {
    fn n_channels(&self) -> usize {
        self.n_channels
    }

    fn fill_step(&mut self, t: Timestep, out: &mut Vec<u32>) -> bool {
        self.replay().fill_step(t, out)
    }
}
