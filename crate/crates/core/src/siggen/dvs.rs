//! DVS camera emulator watching a moving light spot.
//!
//! The scene is a Gaussian spot (brightness normalized to `[0, 1]`) moving
//! along straight lines. When it leaves the field it re-enters from a random
//! point of a random edge, heading to a random interior point with a speed
//! drawn from the configured range.
//!
//! Every pixel `p` owns three channels:
//!
//! | channel   | spikes                                                      |
//! |-----------|-------------------------------------------------------------|
//! | `3p`      | Bernoulli, probability `min(1, scale * B * dt)`             |
//! | `3p + 1`  | ON: accumulated brightness increase reaches `threshold`     |
//! | `3p + 2`  | OFF: accumulated brightness decrease reaches `threshold`    |
//!
//! ON/OFF accumulators lose one `threshold` per emitted event and emit at most
//! one event per step, so a large jump is spread over the following steps.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{EventStream, SignalSource};
use crate::rng::{self, Rng};
use crate::{Error, Timestep};

/// Seconds per simulation step.
const DT: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvsConfig {
    pub width: usize,
    pub height: usize,
    /// Channel-1 rate in Hz per unit brightness.
    pub brightness_rate_scale: f64,
    /// Brightness change per ON/OFF event.
    pub change_threshold: f64,
    /// Mean rate per channel that calibration aims at, in Hz.
    pub target_mean_rate: f64,
    pub seed: u64,
}

impl DvsConfig {
    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn n_channels(&self) -> usize {
        3 * self.n_pixels()
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("dvs.width", "field must be non-empty"));
        }
        if !(self.brightness_rate_scale >= 0.0) {
            return Err(Error::invalid("dvs.brightness_rate_scale", "must be >= 0"));
        }
        if !(self.change_threshold > 0.0) {
            return Err(Error::invalid("dvs.change_threshold", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Standard deviation of the Gaussian spot profile, in pixels.
    pub spot_radius: f64,
    /// Speed range in pixels per step.
    pub speed_range: (f64, f64),
    /// Per-step probability of jumping to a new entry point before leaving.
    #[serde(default)]
    pub rearm_prob: f64,
}

impl SceneConfig {
    pub fn validate(&self, dvs: &DvsConfig) -> Result<(), Error> {
        let limit = dvs.width.min(dvs.height) as f64 / 2.0;
        if !(self.spot_radius > 0.0 && self.spot_radius < limit) {
            return Err(Error::invalid("scene.spot_radius", format!("must lie in (0, {limit})")));
        }
        let (lo, hi) = self.speed_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::invalid("scene.speed_range", "need 0 < low <= high"));
        }
        if !(0.0..1.0).contains(&self.rearm_prob) {
            return Err(Error::invalid("scene.rearm_prob", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Position and velocity of the spot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenePhasePoint {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl ScenePhasePoint {
    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.vx, self.vy]
    }
}

/// Spot trajectory and rendered brightness frames.
#[derive(Debug, Clone)]
pub struct LightSpotScene {
    width: usize,
    height: usize,
    cfg: SceneConfig,
    rng: Rng,
    state: ScenePhasePoint,
    frame: Vec<f64>,
    started: bool,
}

impl LightSpotScene {
    pub fn new(dvs: &DvsConfig, cfg: SceneConfig) -> Result<Self, Error> {
        dvs.validate()?;
        cfg.validate(dvs)?;
        Ok(Self {
            width: dvs.width,
            height: dvs.height,
            cfg,
            rng: rng::stream(dvs.seed, "scene"),
            state: ScenePhasePoint::default(),
            frame: vec![0.0; dvs.n_pixels()],
            started: false,
        })
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && x < self.width as f64 && y >= 0.0 && y < self.height as f64
    }

    fn respawn(&mut self) {
        let (w, h) = (self.width as f64, self.height as f64);
        // just inside the far edges so the entry point is a valid position
        let (wi, hi) = (w * (1.0 - 1e-9), h * (1.0 - 1e-9));
        let along = self.rng.random::<f64>();
        let (x, y) = match self.rng.random_range(0..4) {
            0 => (0.0, along * hi),
            1 => (wi, along * hi),
            2 => (along * wi, 0.0),
            _ => (along * wi, hi),
        };
        let (tx, ty) = loop {
            let tx = w * (0.2 + 0.6 * self.rng.random::<f64>());
            let ty = h * (0.2 + 0.6 * self.rng.random::<f64>());
            if (tx - x).hypot(ty - y) > 1e-6 {
                break (tx, ty);
            }
        };
        let (lo, hi_s) = self.cfg.speed_range;
        let speed = if hi_s > lo { self.rng.random_range(lo..hi_s) } else { lo };
        let norm = (tx - x).hypot(ty - y);
        self.state = ScenePhasePoint { x, y, vx: speed * (tx - x) / norm, vy: speed * (ty - y) / norm };
    }

    fn advance(&mut self) {
        if !self.started {
            self.started = true;
            self.respawn();
            return;
        }
        if self.cfg.rearm_prob > 0.0 && self.rng.random::<f64>() < self.cfg.rearm_prob {
            self.respawn();
            return;
        }
        let (x, y) = (self.state.x + self.state.vx, self.state.y + self.state.vy);
        if self.inside(x, y) {
            self.state.x = x;
            self.state.y = y;
        } else {
            self.respawn();
        }
    }

    fn render(&mut self) {
        let s = self.state;
        let inv = 1.0 / (2.0 * self.cfg.spot_radius * self.cfg.spot_radius);
        for py in 0..self.height {
            let dy = py as f64 + 0.5 - s.y;
            for px in 0..self.width {
                let dx = px as f64 + 0.5 - s.x;
                self.frame[py * self.width + px] = (-(dx * dx + dy * dy) * inv).exp();
            }
        }
    }

    /// Moves the spot one step and renders it. Returns the frame (row-major,
    /// `y * width + x`) and the spot's phase point for this step.
    pub fn next_frame(&mut self) -> (&[f64], ScenePhasePoint) {
        self.advance();
        self.render();
        (&self.frame, self.state)
    }
}

impl Iterator for LightSpotScene {
    type Item = (Vec<f64>, ScenePhasePoint);

    fn next(&mut self) -> Option<Self::Item> {
        let (f, p) = self.next_frame();
        Some((f.to_vec(), p))
    }
}

/// The first `duration` steps of a light-spot scene.
pub fn light_spot_scene(
    dvs: &DvsConfig,
    scene: SceneConfig,
    duration: Timestep,
) -> Result<impl Iterator<Item = (Vec<f64>, ScenePhasePoint)>, Error> {
    Ok(LightSpotScene::new(dvs, scene)?.take(duration as usize))
}

/// Per-pixel event generation state.
#[derive(Debug, Clone)]
pub struct DvsEmulator {
    config: DvsConfig,
    rng: Rng,
    acc_on: Vec<f64>,
    acc_off: Vec<f64>,
}

impl DvsEmulator {
    pub fn new(config: DvsConfig) -> Result<Self, Error> {
        config.validate()?;
        Ok(Self {
            rng: rng::stream(config.seed, "dvs"),
            acc_on: vec![0.0; config.n_pixels()],
            acc_off: vec![0.0; config.n_pixels()],
            config,
        })
    }

    pub fn config(&self) -> &DvsConfig {
        &self.config
    }

    /// Appends the channels spiking at the step whose frame is `cur`.
    pub fn frame_to_events(&mut self, prev: &[f64], cur: &[f64], out: &mut Vec<u32>) {
        assert_eq!(prev.len(), cur.len());
        let scale = self.config.brightness_rate_scale * DT;
        let thr = self.config.change_threshold;
        for p in 0..cur.len() {
            let b = cur[p];
            let prob = (scale * b).min(1.0);
            if prob > 0.0 && self.rng.random::<f64>() < prob {
                out.push(3 * p as u32);
            }
            let delta = b - prev[p];
            if delta > 0.0 {
                self.acc_on[p] += delta;
            } else if delta < 0.0 {
                self.acc_off[p] -= delta;
            }
            if self.acc_on[p] >= thr {
                self.acc_on[p] -= thr;
                out.push(3 * p as u32 + 1);
            }
            if self.acc_off[p] >= thr {
                self.acc_off[p] -= thr;
                out.push(3 * p as u32 + 2);
            }
        }
    }
}

/// Free-function form of [`DvsEmulator::frame_to_events`].
pub fn dvs_frame_to_events(emulator: &mut DvsEmulator, prev: &[f64], cur: &[f64], out: &mut Vec<u32>) {
    emulator.frame_to_events(prev, cur, out)
}

/// Scene plus camera as a live signal source; keeps the trajectory.
#[derive(Debug, Clone)]
pub struct DvsSource {
    scene: LightSpotScene,
    emulator: DvsEmulator,
    prev: Vec<f64>,
    trajectory: Vec<ScenePhasePoint>,
    next_t: Timestep,
}

impl DvsSource {
    pub fn new(dvs: DvsConfig, scene: SceneConfig) -> Result<Self, Error> {
        Ok(Self {
            scene: LightSpotScene::new(&dvs, scene)?,
            emulator: DvsEmulator::new(dvs)?,
            prev: Vec::new(),
            trajectory: Vec::new(),
            next_t: 0,
        })
    }

    pub fn trajectory(&self) -> &[ScenePhasePoint] {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Vec<ScenePhasePoint> {
        self.trajectory
    }
}

impl SignalSource for DvsSource {
    fn n_channels(&self) -> usize {
        self.emulator.config.n_channels()
    }

    fn fill_step(&mut self, t: Timestep, out: &mut Vec<u32>) -> bool {
        assert_eq!(t, self.next_t, "DVS source is sequential");
        self.next_t += 1;
        let (frame, phase) = self.scene.next_frame();
        if self.prev.is_empty() {
            // the camera starts adapted to the first frame
            self.prev = frame.to_vec();
        }
        self.emulator.frame_to_events(&self.prev, frame, out);
        self.prev.copy_from_slice(frame);
        self.trajectory.push(phase);
        true
    }
}

/// Generates `duration` steps of DVS events and the matching trajectory.
pub fn gen_dvs_signal(
    dvs: &DvsConfig,
    scene: SceneConfig,
    duration: Timestep,
) -> Result<(EventStream, Vec<ScenePhasePoint>), Error> {
    let mut src = DvsSource::new(*dvs, scene)?;
    let stream = EventStream::record(&mut src, duration);
    Ok((stream, src.into_trajectory()))
}

/// Expected channel-1 rate (Hz, averaged over pixels and frames) for a scale.
fn brightness_rate(frames: &[Vec<f64>], scale: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for f in frames {
        for &b in f {
            sum += (scale * b * DT).min(1.0);
            n += 1;
        }
    }
    sum / n as f64 / DT
}

/// ON/OFF rate (Hz per change channel) the accumulators produce for a threshold.
fn change_rate(frames: &[Vec<f64>], threshold: f64) -> f64 {
    let n_pix = frames[0].len();
    let mut on = vec![0.0; n_pix];
    let mut off = vec![0.0; n_pix];
    let mut events = 0u64;
    for pair in frames.windows(2) {
        for p in 0..n_pix {
            let delta = pair[1][p] - pair[0][p];
            if delta > 0.0 {
                on[p] += delta;
            } else {
                off[p] -= delta;
            }
            if on[p] >= threshold {
                on[p] -= threshold;
                events += 1;
            }
            if off[p] >= threshold {
                off[p] -= threshold;
                events += 1;
            }
        }
    }
    events as f64 / (2 * n_pix) as f64 / ((frames.len() - 1) as f64 * DT)
}

/// Chooses `brightness_rate_scale` and `change_threshold` so that both the
/// brightness channels and the change channels fire at `target_mean_rate`
/// on average over `frames`; the mean over all channels then matches too.
pub fn calibrate_thresholds(frames: &[Vec<f64>], dvs: &DvsConfig) -> Result<(f64, f64), Error> {
    let target = dvs.target_mean_rate;
    if !(target > 0.0) {
        return Err(Error::invalid("dvs.target_mean_rate", "must be positive"));
    }
    if frames.len() < 2 {
        return Err(Error::Calibration("need at least two frames".into()));
    }
    if target >= 1.0 / DT {
        return Err(Error::Calibration(format!("target {target} Hz exceeds one spike per step")));
    }

    let max_rate = brightness_rate(frames, f64::MAX);
    if max_rate < target {
        return Err(Error::Calibration(format!(
            "brightness channels saturate at {max_rate:.3} Hz, below the {target} Hz target (scene too dark)"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while brightness_rate(frames, hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if brightness_rate(frames, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-12 * hi {
            break;
        }
    }
    let scale = 0.5 * (lo + hi);

    // change rate is non-increasing in the threshold; bisect on a log scale
    let tiny = 1e-9;
    if change_rate(frames, tiny) < target {
        return Err(Error::Calibration(format!(
            "change channels cannot reach {target} Hz: the scene has too little brightness change"
        )));
    }
    let total_change: f64 = frames.windows(2).map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).abs()).sum::<f64>()).sum();
    let (mut lo, mut hi) = (tiny.ln(), total_change.max(1.0).ln());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if change_rate(frames, mid.exp()) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let threshold = lo.exp();
    let achieved = change_rate(frames, threshold);
    if (achieved - target).abs() > 0.05 * target {
        return Err(Error::Calibration(format!("change channels settle at {achieved:.3} Hz for a {target} Hz target")));
    }
    Ok((scale, threshold))
}
