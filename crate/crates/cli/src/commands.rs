//! The four verbs and the file layouts they read and write.
//!
//! | verb         | writes                                                      |
//! |--------------|-------------------------------------------------------------|
//! | `signal`     | `events.txt`, `intervals.txt` or `trajectory.txt`, manifest |
//! | `experiment` | `metrics.json`, `snapshot.json`, manifest                   |
//! | `optimize`   | `history.csv`, `best.json`, manifest                        |
//! | `report`     | `report.csv`, `plot.csv`                                    |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scobul::eval::{ClusterReport, ReceptiveCenter};
use scobul::events::{self, Snapshot};
use scobul::experiment::{run_cluster_experiment, run_scene_experiment, SceneData};
use scobul::optimize::{ga_run, GaResult, Genome, GenerationStats};
use scobul::rng::child_seed;
use scobul::siggen::{calibrate_thresholds, gen_cluster_signal, gen_dvs_signal, light_spot_scene, EventStream, GroundTruthLog};
use scobul::{Error, Timestep};

use crate::config::{Arm, Config};
use crate::error::{CliError, Result};
use crate::manifest::{sha256_hex, RunManifest};

pub const METRICS_SCHEMA: u32 = 1;
pub const HISTORY_SCHEMA: u32 = 1;

pub const EVENTS_FILE: &str = "events.txt";
pub const INTERVALS_FILE: &str = "intervals.txt";
pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const BEST_FILE: &str = "best.json";
pub const REPORT_FILE: &str = "report.csv";
pub const PLOT_FILE: &str = "plot.csv";

/// A signal ready to be replayed into a network.
#[derive(Debug, Clone)]
pub enum Signal {
    Cluster { stream: EventStream, truth: GroundTruthLog },
    Scene(SceneData),
}

impl Signal {
    pub fn stream(&self) -> &EventStream {
        match self {
            Signal::Cluster { stream, .. } => stream,
            Signal::Scene(d) => &d.stream,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedSignal {
    pub signal: Signal,
    pub hash: String,
}

/// Generates the signal described by `config`, or loads the replay directory.
pub fn load_signal(config: &Config) -> Result<LoadedSignal> {
    let duration = config.duration();
    if let Some(replay) = &config.replay {
        return read_signal_dir(&replay.dir, config, duration);
    }
    let signal = if let Some(spec) = config.signal.cluster_spec(config.seed) {
        let (stream, truth) = gen_cluster_signal(&spec, duration)?;
        Signal::Cluster { stream, truth }
    } else {
        let (mut dvs, scene, n_cal) = config.signal.dvs(config.seed).expect("signal is cluster or dvs");
        let frames: Vec<Vec<f64>> = light_spot_scene(&dvs, scene, n_cal)?.map(|(f, _)| f).collect();
        let (scale, threshold) = calibrate_thresholds(&frames, &dvs)?;
        log::info!("calibrated brightness scale {scale:.4}, change threshold {threshold:.6}");
        dvs.brightness_rate_scale = scale;
        dvs.change_threshold = threshold;
        let (stream, trajectory) = gen_dvs_signal(&dvs, scene, duration)?;
        Signal::Scene(SceneData::new(stream, trajectory)?)
    };
    let recipe = serde_json::to_vec(&(&config.signal, config.seed, duration))?;
    Ok(LoadedSignal { signal, hash: sha256_hex(&[b"generated", &recipe]) })
}

fn read_signal_dir(dir: &Path, config: &Config, duration: Timestep) -> Result<LoadedSignal> {
    let events_text = fs::read_to_string(dir.join(EVENTS_FILE))?;
    let stream = events::read_events(&events_text)?;
    if stream.n_channels() != config.signal.n_channels() {
        return Err(Error::invalid(
            "replay.dir",
            format!("{} channels in the event file, config expects {}", stream.n_channels(), config.signal.n_channels()),
        )
        .into());
    }
    if (stream.len() as Timestep) < duration {
        return Err(Error::SignalExhausted { steps: stream.len() as Timestep, needed: duration }.into());
    }
    let (signal, truth_text) = match config.signal.kind() {
        "cluster" => {
            let text = fs::read_to_string(dir.join(INTERVALS_FILE))?;
            (Signal::Cluster { stream, truth: events::read_intervals(&text)? }, text)
        }
        _ => {
            let text = fs::read_to_string(dir.join(TRAJECTORY_FILE))?;
            let trajectory = events::read_trajectory(&text)?;
            (Signal::Scene(SceneData::new(stream, trajectory)?), text)
        }
    };
    let hash = sha256_hex(&[b"file", events_text.as_bytes(), truth_text.as_bytes()]);
    Ok(LoadedSignal { signal, hash })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| {
        CliError::Core(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
    })
}

pub fn cmd_signal(config: &Config, out: &Path) -> Result<RunManifest> {
    fs::create_dir_all(out)?;
    let loaded = load_signal(config)?;
    let events_text = events::write_events(loaded.signal.stream());
    write(&out.join(EVENTS_FILE), &events_text)?;
    let truth_file = match &loaded.signal {
        Signal::Cluster { truth, .. } => {
            write(&out.join(INTERVALS_FILE), &events::write_intervals(truth))?;
            INTERVALS_FILE
        }
        Signal::Scene(d) => {
            write(&out.join(TRAJECTORY_FILE), &events::write_trajectory(&d.trajectory))?;
            TRAJECTORY_FILE
        }
    };
    let manifest = RunManifest::new("signal", None, config, &loaded.hash, &[EVENTS_FILE, truth_file]);
    write(&out.join(MANIFEST_FILE), &manifest.to_json())?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    /// Absent when every test window was silent.
    pub normalized_msd: Option<f64>,
    pub coverage: f64,
    pub scored_windows: usize,
    pub receptive_centers: Vec<ReceptiveCenter>,
    pub silent_neurons: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub schema_version: u32,
    pub kind: String,
    pub arm: Arm,
    pub seed: u64,
    pub signal_hash: String,
    pub phases: (Timestep, Timestep, Timestep),
    pub window: Timestep,
    pub rebirths: u64,
    pub test_spike_counts: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scene: Option<SceneMetrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cluster: Option<ClusterReport>,
}

impl Metrics {
    /// The headline number: normalized MSD (scene) or mean F1 (cluster).
    pub fn score(&self) -> Option<f64> {
        match (&self.scene, &self.cluster) {
            (Some(s), _) => s.normalized_msd,
            (_, Some(c)) => Some(c.mean_f1),
            _ => None,
        }
    }
}

/// Runs one experiment on an already loaded signal.
pub fn run_experiment(config: &Config, arm: Arm, loaded: &LoadedSignal) -> Result<(Metrics, Snapshot)> {
    let net_cfg = config.network_config(arm, config.seed)?;
    let p = config.phases;
    let mut metrics = Metrics {
        schema_version: METRICS_SCHEMA,
        kind: config.signal.kind().to_string(),
        arm,
        seed: config.seed,
        signal_hash: loaded.hash.clone(),
        phases: (p.train, p.rf, p.test),
        window: p.window,
        rebirths: 0,
        test_spike_counts: Vec::new(),
        scene: None,
        cluster: None,
    };
    let snapshot = match &loaded.signal {
        Signal::Scene(data) => {
            let out = run_scene_experiment(&net_cfg, p.phases(), p.window, data)?;
            let (normalized_msd, coverage, scored_windows) = match out.score {
                Ok(s) => (Some(s.normalized_msd), s.coverage, s.scored_windows),
                Err(Error::NoPredictions) => (None, 0.0, 0),
                Err(e) => return Err(e.into()),
            };
            metrics.rebirths = out.rebirths;
            metrics.test_spike_counts = out.test_spike_counts;
            metrics.scene = Some(SceneMetrics {
                normalized_msd,
                coverage,
                scored_windows,
                receptive_centers: out.fields.centers,
                silent_neurons: out.fields.silent,
            });
            Snapshot::of(&out.network)
        }
        Signal::Cluster { stream, truth } => {
            // the cluster task has no receptive-field phase; `rf` steps are skipped
            let train = p.train + p.rf;
            let out = run_cluster_experiment(&net_cfg, train, p.test, stream, truth, config.eval.high_f1)?;
            metrics.rebirths = out.rebirths;
            metrics.test_spike_counts = out.test_spike_counts;
            metrics.cluster = Some(out.report);
            Snapshot::of(&out.network)
        }
    };
    Ok((metrics, snapshot))
}

pub fn cmd_experiment(config: &Config, arm: Arm, out: &Path) -> Result<Metrics> {
    fs::create_dir_all(out)?;
    let loaded = load_signal(config)?;
    let (metrics, snapshot) = run_experiment(config, arm, &loaded)?;
    write(&out.join(METRICS_FILE), &(serde_json::to_string_pretty(&metrics)? + "\n"))?;
    write(&out.join(SNAPSHOT_FILE), &(serde_json::to_string(&snapshot)? + "\n"))?;
    let manifest = RunManifest::new("experiment", Some(arm), config, &loaded.hash, &[METRICS_FILE, SNAPSHOT_FILE]);
    write(&out.join(MANIFEST_FILE), &manifest.to_json())?;
    Ok(metrics)
}

/// Network seeds used for every fitness evaluation.
pub fn fitness_seeds(config: &Config, n: usize) -> Vec<u64> {
    (0..n).map(|i| child_seed(config.seed, "fitness", i as u64)).collect()
}

/// Fitness of one hyperparameter setting (lower is better): mean normalized
/// MSD on a scene, `1 - mean F1` on clusters. `None` marks a degenerate run.
pub fn fitness(config: &Config, arm: Arm, signal: &Signal, seeds: &[u64], genes: &[(&str, f64)]) -> Option<f64> {
    let p = config.phases;
    let mut total = 0.0;
    for &seed in seeds {
        let net = match config.with_genes(arm, seed, genes) {
            Ok(n) => n,
            Err(e) => {
                log::warn!("genome rejected: {e}");
                return None;
            }
        };
        let score = match signal {
            Signal::Scene(data) => match run_scene_experiment(&net, p.phases(), p.window, data) {
                Ok(out) => out.score.ok()?.normalized_msd,
                Err(e) => {
                    log::warn!("fitness run failed: {e}");
                    return None;
                }
            },
            Signal::Cluster { stream, truth } => {
                match run_cluster_experiment(&net, p.train + p.rf, p.test, stream, truth, config.eval.high_f1) {
                    Ok(out) if out.test_spike_counts.iter().any(|&c| c > 0) => 1.0 - out.report.mean_f1,
                    Ok(_) => return None,
                    Err(e) => {
                        log::warn!("fitness run failed: {e}");
                        return None;
                    }
                }
            }
        };
        total += score;
    }
    Some(total / seeds.len() as f64)
}

/// Runs the GA for one arm on a loaded signal.
pub fn run_optimize(config: &Config, arm: Arm, loaded: &LoadedSignal) -> Result<GaResult> {
    let ga = config.ga_config()?;
    let space = config.search_space(arm);
    if space.is_empty() {
        return Err(Error::invalid(format!("search.{}", arm.name()), "no parameters to search").into());
    }
    let seeds = fitness_seeds(config, ga.seeds_per_fitness);
    let result = ga_run(&space, &ga, |g: &Genome| fitness(config, arm, &loaded.signal, &seeds, &space.decode(g)))?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestGenome {
    pub schema_version: u32,
    pub arm: Arm,
    pub fitness: f64,
    pub genome: Genome,
    pub params: Vec<(String, f64)>,
    pub generations: usize,
    pub evaluations: usize,
}

pub fn history_header(kind: &str, arm: Arm, signal_hash: &str) -> String {
    format!("# scobul-history v{HISTORY_SCHEMA} kind={kind} arm={} signal={signal_hash}\n", arm.name())
}

pub fn write_history(header: &str, history: &[GenerationStats]) -> Result<String> {
    let mut w = csv::Writer::from_writer(header.as_bytes().to_vec());
    for h in history {
        w.serialize(h)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn cmd_optimize(config: &Config, arm: Arm, out: &Path, resume: bool) -> Result<GaResult> {
    if resume {
        return Err(CliError::Unsupported("resuming a search from a history file is not supported".into()));
    }
    // validate the search before spending time on the signal
    config.ga_config()?.validate()?;
    config.search_space(arm).validate()?;
    fs::create_dir_all(out)?;
    let loaded = load_signal(config)?;
    let result = run_optimize(config, arm, &loaded)?;
    let header = history_header(config.signal.kind(), arm, &loaded.hash);
    write(&out.join(HISTORY_FILE), &write_history(&header, &result.history)?)?;
    let space = config.search_space(arm);
    let best = BestGenome {
        schema_version: METRICS_SCHEMA,
        arm,
        fitness: result.best_fitness,
        genome: result.best.clone(),
        params: space.decode(&result.best).into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        generations: result.history.len(),
        evaluations: result.evaluations,
    };
    write(&out.join(BEST_FILE), &(serde_json::to_string_pretty(&best)? + "\n"))?;
    let manifest = RunManifest::new("optimize", Some(arm), config, &loaded.hash, &[HISTORY_FILE, BEST_FILE]);
    write(&out.join(MANIFEST_FILE), &manifest.to_json())?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub kind: String,
    pub arm: String,
    pub signal: String,
    pub rows: Vec<GenerationStats>,
}

pub fn read_history(text: &str) -> Result<History> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let bad = |reason: String| CliError::Core(Error::Parse { what: "history", line: 1, reason });
    let fields = first
        .strip_prefix("# scobul-history v")
        .ok_or_else(|| bad("not a history file".into()))?;
    let mut parts = fields.split(' ');
    let version: u32 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad version".into()))?;
    if version != HISTORY_SCHEMA {
        return Err(bad(format!("schema version {version} unsupported (expected {HISTORY_SCHEMA})")));
    }
    let mut get = |key: &str| -> Result<String> {
        parts
            .next()
            .and_then(|p| p.strip_prefix(key))
            .and_then(|p| p.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("header lacks `{key}=`")))
    };
    let (kind, arm, signal) = (get("kind")?, get("arm")?, get("signal")?);
    let mut rows = Vec::new();
    for r in csv::Reader::from_reader(rest.as_bytes()).deserialize() {
        rows.push(r?);
    }
    Ok(History { kind, arm, signal, rows })
}

enum ReportInput {
    Metrics(PathBuf, Metrics),
    History(PathBuf, History),
}

fn read_report_input(path: &Path) -> Result<ReportInput> {
    let text = fs::read_to_string(path)?;
    if text.starts_with("# scobul-history") {
        return Ok(ReportInput::History(path.to_path_buf(), read_history(&text)?));
    }
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value.get("schema_version").and_then(|v| v.as_u64());
    if version != Some(METRICS_SCHEMA as u64) {
        return Err(CliError::Core(Error::Parse {
            what: "metrics",
            line: 0,
            reason: format!("{}: schema version {version:?} unsupported (expected {METRICS_SCHEMA})", path.display()),
        }));
    }
    Ok(ReportInput::Metrics(path.to_path_buf(), serde_json::from_value(value)?))
}

/// Writes a comparison table and, for histories, plot series of the
/// per-generation best fitness. Returns the table text.
pub fn cmd_report(inputs: &[PathBuf], out: &Path) -> Result<String> {
    if inputs.is_empty() {
        return Err(CliError::Usage("report needs at least one metrics or history file".into()));
    }
    let parsed: Vec<ReportInput> = inputs.iter().map(|p| read_report_input(p)).collect::<Result<_>>()?;

    // every input must describe the same task on the same signal
    let key = |i: &ReportInput| match i {
        ReportInput::Metrics(p, m) => (p.clone(), m.kind.clone(), m.signal_hash.clone()),
        ReportInput::History(p, h) => (p.clone(), h.kind.clone(), h.signal.clone()),
    };
    let first = key(&parsed[0]);
    let mut mismatches = Vec::new();
    for k in parsed.iter().skip(1).map(key) {
        if k.1 != first.1 {
            mismatches.push(format!("{} has kind {} but {} has kind {}", k.0.display(), k.1, first.0.display(), first.1));
        } else if k.2 != first.2 {
            mismatches.push(format!("{} and {} used different signals", k.0.display(), first.0.display()));
        }
    }
    if !mismatches.is_empty() {
        return Err(CliError::Mismatch(mismatches.join("; ")));
    }

    fs::create_dir_all(out)?;
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["file", "kind", "arm", "seed", "score", "coverage", "generations"])?;
    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    for input in &parsed {
        match input {
            ReportInput::Metrics(p, m) => {
                let coverage = m.scene.as_ref().map(|s| s.coverage.to_string()).unwrap_or_default();
                table.write_record([
                    p.display().to_string(),
                    m.kind.clone(),
                    m.arm.name().to_string(),
                    m.seed.to_string(),
                    m.score().map(|s| s.to_string()).unwrap_or_default(),
                    coverage,
                    String::new(),
                ])?;
            }
            ReportInput::History(p, h) => {
                let best = h.rows.last().map(|r| r.best_so_far.to_string()).unwrap_or_default();
                table.write_record([
                    p.display().to_string(),
                    h.kind.clone(),
                    h.arm.clone(),
                    String::new(),
                    best,
                    String::new(),
                    h.rows.len().to_string(),
                ])?;
                let mut label = h.arm.clone();
                let mut n = 2;
                while series.iter().any(|(l, _)| *l == label) {
                    label = format!("{}_{n}", h.arm);
                    n += 1;
                }
                series.push((label, h.rows.iter().map(|r| r.best).collect()));
            }
        }
    }
    let table_bytes = table.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    let table_text = String::from_utf8(table_bytes).expect("csv output is utf-8");
    write(&out.join(REPORT_FILE), &table_text)?;

    if !series.is_empty() {
        let mut plot = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["generation".to_string()];
        header.extend(series.iter().map(|(l, _)| l.clone()));
        plot.write_record(&header)?;
        let len = series.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
        for g in 0..len {
            let mut row = vec![g.to_string()];
            row.extend(series.iter().map(|(_, s)| s.get(g).map(|v| v.to_string()).unwrap_or_default()));
            plot.write_record(&row)?;
        }
        let bytes = plot.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        write(&out.join(PLOT_FILE), &String::from_utf8(bytes).expect("csv output is utf-8"))?;
    }
    Ok(table_text)
}
