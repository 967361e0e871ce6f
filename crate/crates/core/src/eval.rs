//! Evaluation of trained networks.
//!
//! Light-spot experiments: each neuron's receptive center is the mean scaled
//! phase point at its firing times during the receptive-field segment. On the
//! test segment every window's position estimate is the spike-count-weighted
//! mean of the centers of the neurons that fired in it, and the score is the
//! mean squared error of those estimates divided by the mean squared distance
//! of the true window positions to the centroid of the whole trajectory.
//! Silent windows are skipped and reported through the coverage.
//!
//! Cluster experiments: precision/recall/F1 of every (neuron, cluster) pair
//! and a greedy one-to-one matching.

use serde::{Deserialize, Serialize};

use crate::network::{SpikeRecord, SpikeSource};
use crate::siggen::{GroundTruthLog, ScenePhasePoint};
use crate::{Error, Timestep};

pub type Phase = [f64; 4];

/// Per-coordinate scale factors (reciprocal standard deviations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetric {
    pub scales: Phase,
}

impl PhaseMetric {
    pub fn apply(&self, p: &ScenePhasePoint) -> Phase {
        let a = p.to_array();
        [a[0] * self.scales[0], a[1] * self.scales[1], a[2] * self.scales[2], a[3] * self.scales[3]]
    }
}

/// Fits the metric on a whole trajectory: `scale_k = 1 / sigma_k`
/// (population standard deviation).
pub fn fit_phase_metric(trajectory: &[ScenePhasePoint]) -> Result<PhaseMetric, Error> {
    if trajectory.is_empty() {
        return Err(Error::DegenerateScene("empty trajectory".into()));
    }
    let n = trajectory.len() as f64;
    let mut mean = [0.0; 4];
    for p in trajectory {
        for (m, v) in mean.iter_mut().zip(p.to_array()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; 4];
    for p in trajectory {
        for ((s, v), m) in var.iter_mut().zip(p.to_array()).zip(mean) {
            *s += (v - m) * (v - m);
        }
    }
    let mut scales = [0.0; 4];
    const NAMES: [&str; 4] = ["x", "y", "vx", "vy"];
    for k in 0..4 {
        let sigma = (var[k] / n).sqrt();
        if !(sigma > 1e-12 * (1.0 + mean[k].abs())) {
            return Err(Error::DegenerateScene(format!("coordinate {} has zero variance", NAMES[k])));
        }
        scales[k] = 1.0 / sigma;
    }
    Ok(PhaseMetric { scales })
}

/// Mean scaled phase point of a trajectory.
pub fn centroid(trajectory: &[ScenePhasePoint], metric: &PhaseMetric) -> Phase {
    let mut c = [0.0; 4];
    for p in trajectory {
        add_scaled(&mut c, &metric.apply(p), 1.0);
    }
    c.iter_mut().for_each(|v| *v /= trajectory.len() as f64);
    c
}

fn add_scaled(acc: &mut Phase, v: &Phase, w: f64) {
    for k in 0..4 {
        acc[k] += w * v[k];
    }
}

fn sq_dist(a: &Phase, b: &Phase) -> f64 {
    (0..4).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceptiveCenter {
    pub neuron_id: u32,
    pub center: Phase,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReceptiveFields {
    pub centers: Vec<ReceptiveCenter>,
    /// Neurons with no spike in the segment; they get no center.
    pub silent: Vec<u32>,
}

fn neuron_spikes(log: &[SpikeRecord]) -> impl Iterator<Item = (Timestep, u32)> + '_ {
    log.iter().filter_map(|r| match r.source {
        SpikeSource::Neuron(j) => Some((r.t, j)),
        SpikeSource::Input(_) => None,
    })
}

/// Receptive centers from the neuron spikes of a segment. `trajectory[t]` is
/// the spot state at absolute step `t`.
pub fn receptive_centers(
    log: &[SpikeRecord],
    trajectory: &[ScenePhasePoint],
    metric: &PhaseMetric,
    n_neurons: usize,
) -> ReceptiveFields {
    let mut sums = vec![[0.0; 4]; n_neurons];
    let mut counts = vec![0u64; n_neurons];
    for (t, j) in neuron_spikes(log) {
        add_scaled(&mut sums[j as usize], &metric.apply(&trajectory[t as usize]), 1.0);
        counts[j as usize] += 1;
    }
    let mut fields = ReceptiveFields::default();
    for j in 0..n_neurons {
        if counts[j] == 0 {
            fields.silent.push(j as u32);
        } else {
            let mut c = sums[j];
            c.iter_mut().for_each(|v| *v /= counts[j] as f64);
            fields.centers.push(ReceptiveCenter { neuron_id: j as u32, center: c, support: counts[j] });
        }
    }
    fields
}

/// Spike-weighted mean of receptive centers for each `window`-step window of
/// `[start, end)`; a trailing partial window is dropped. Spikes of neurons
/// without a center do not count.
pub fn predict_positions(
    log: &[SpikeRecord],
    centers: &[ReceptiveCenter],
    start: Timestep,
    end: Timestep,
    window: Timestep,
) -> Vec<Option<Phase>> {
    assert!(window > 0);
    let n_windows = (end.saturating_sub(start) / window) as usize;
    let max_id = centers.iter().map(|c| c.neuron_id as usize + 1).max().unwrap_or(0);
    let mut lookup: Vec<Option<&Phase>> = vec![None; max_id];
    for c in centers {
        lookup[c.neuron_id as usize] = Some(&c.center);
    }
    let mut sums = vec![[0.0; 4]; n_windows];
    let mut weights = vec![0u64; n_windows];
    for (t, j) in neuron_spikes(log) {
        if t < start {
            continue;
        }
        let w = ((t - start) / window) as usize;
        if w >= n_windows {
            continue;
        }
        if let Some(Some(c)) = lookup.get(j as usize) {
            add_scaled(&mut sums[w], c, 1.0);
            weights[w] += 1;
        }
    }
    sums.into_iter()
        .zip(weights)
        .map(|(mut s, w)| {
            (w > 0).then(|| {
                s.iter_mut().for_each(|v| *v /= w as f64);
                s
            })
        })
        .collect()
}

/// Window means of the scaled trajectory over `[start, end)`.
pub fn truth_windows(
    trajectory: &[ScenePhasePoint],
    metric: &PhaseMetric,
    start: Timestep,
    end: Timestep,
    window: Timestep,
) -> Vec<Phase> {
    let n_windows = (end.saturating_sub(start) / window) as usize;
    (0..n_windows)
        .map(|w| {
            let from = start as usize + w * window as usize;
            let mut m = [0.0; 4];
            for p in &trajectory[from..from + window as usize] {
                add_scaled(&mut m, &metric.apply(p), 1.0);
            }
            m.iter_mut().for_each(|v| *v /= window as f64);
            m
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdScore {
    pub normalized_msd: f64,
    /// Fraction of windows with a prediction.
    pub coverage: f64,
    pub scored_windows: usize,
}

/// Mean squared prediction error over the windows with a prediction, divided
/// by the mean squared distance of the same windows' truth to `centroid`.
pub fn normalized_msd(predictions: &[Option<Phase>], truth: &[Phase], centroid: &Phase) -> Result<MsdScore, Error> {
    assert_eq!(predictions.len(), truth.len());
    let mut num = 0.0;
    let mut den = 0.0;
    let mut n = 0usize;
    for (p, t) in predictions.iter().zip(truth) {
        if let Some(p) = p {
            num += sq_dist(p, t);
            den += sq_dist(t, centroid);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoPredictions);
    }
    if den == 0.0 {
        return Err(Error::DegenerateScene("scored windows coincide with the centroid".into()));
    }
    Ok(MsdScore { normalized_msd: num / den, coverage: n as f64 / predictions.len() as f64, scored_windows: n })
}

// ---------------------------------------------------------------------------
// Cluster recognition

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// `scores[neuron][cluster]`.
    pub scores: Vec<Vec<PairScore>>,
    /// Matched neuron and its F1 for each cluster.
    pub matching: Vec<Option<(u32, f64)>>,
    /// Mean over clusters of the matched F1 (0 for unmatched clusters).
    pub mean_f1: f64,
    /// Clusters without a matched neuron of F1 >= the high-F1 level.
    pub unrecognized: Vec<usize>,
    /// Clusters recognized by more than one neuron at the high-F1 level.
    pub redundant: Vec<usize>,
    /// Neurons at the high-F1 level for two or more clusters.
    pub ambiguous: Vec<u32>,
}

/// Scores neuron spikes against cluster activity over `[from, to)`.
pub fn cluster_recognition_report(
    log: &[SpikeRecord],
    n_neurons: usize,
    truth: &GroundTruthLog,
    from: Timestep,
    to: Timestep,
    high_f1: f64,
) -> ClusterReport {
    let n_clusters = truth.n_clusters();
    let mut spikes: Vec<Vec<Timestep>> = vec![Vec::new(); n_neurons];
    for (t, j) in neuron_spikes(log) {
        if t >= from && t < to {
            spikes[j as usize].push(t);
        }
    }
    spikes.iter_mut().for_each(|s| s.sort_unstable());

    let intervals: Vec<Vec<(Timestep, Timestep)>> = truth
        .intervals
        .iter()
        .map(|iv| iv.iter().filter(|(s, _)| *s >= from && *s < to).map(|&(s, e)| (s, e.min(to))).collect())
        .collect();

    let count_in = |times: &[Timestep], s: Timestep, e: Timestep| -> usize {
        times.partition_point(|&t| t < e) - times.partition_point(|&t| t < s)
    };

    let mut scores = vec![vec![PairScore::default(); n_clusters]; n_neurons];
    for (j, times) in spikes.iter().enumerate() {
        for (i, iv) in intervals.iter().enumerate() {
            let mut inside = 0usize;
            let mut hit = 0usize;
            for &(s, e) in iv {
                let c = count_in(times, s, e);
                inside += c;
                hit += (c > 0) as usize;
            }
            let precision = if times.is_empty() { 0.0 } else { inside as f64 / times.len() as f64 };
            let recall = if iv.is_empty() { 0.0 } else { hit as f64 / iv.len() as f64 };
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            scores[j][i] = PairScore { precision, recall, f1 };
        }
    }

    let mut pairs: Vec<(f64, usize, usize)> = (0..n_neurons)
        .flat_map(|j| (0..n_clusters).map(move |i| (j, i)))
        .map(|(j, i)| (scores[j][i].f1, j, i))
        .filter(|p| p.0 > 0.0)
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut matching = vec![None; n_clusters];
    let mut used = vec![false; n_neurons];
    for (f1, j, i) in pairs {
        if matching[i].is_none() && !used[j] {
            matching[i] = Some((j as u32, f1));
            used[j] = true;
        }
    }
    let mean_f1 = if n_clusters == 0 {
        0.0
    } else {
        matching.iter().map(|m| m.map_or(0.0, |(_, f)| f)).sum::<f64>() / n_clusters as f64
    };

    let unrecognized = (0..n_clusters).filter(|&i| !matches!(matching[i], Some((_, f)) if f >= high_f1)).collect();
    let redundant = (0..n_clusters)
        .filter(|&i| (0..n_neurons).filter(|&j| scores[j][i].f1 >= high_f1).count() > 1)
        .collect();
    let ambiguous = (0..n_neurons)
        .filter(|&j| scores[j].iter().filter(|s| s.f1 >= high_f1).count() >= 2)
        .map(|j| j as u32)
        .collect();

    ClusterReport { scores, matching, mean_f1, unrecognized, redundant, ambiguous }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f64, y: f64, vx: f64, vy: f64) -> ScenePhasePoint {
        ScenePhasePoint { x, y, vx, vy }
    }

    fn nspike(t: Timestep, j: u32) -> SpikeRecord {
        SpikeRecord { t, source: SpikeSource::Neuron(j) }
    }

    #[test]
    fn metric_is_reciprocal_sigma() {
        // alternating values: sigma = half the spread
        let traj: Vec<_> = (0..100)
            .map(|i| if i % 2 == 0 { pt(0.0, 0.0, 0.0, 0.0) } else { pt(4.0, 4.0, 0.2, 0.2) })
            .collect();
        let m = fit_phase_metric(&traj).unwrap();
        let expected = [0.5, 0.5, 10.0, 10.0];
        for k in 0..4 {
            assert!((m.scales[k] - expected[k]).abs() < 1e-9, "{:?}", m.scales);
        }
    }

    #[test]
    fn constant_coordinate_is_rejected() {
        let traj: Vec<_> = (0..10).map(|i| pt(3.0, i as f64, i as f64, -(i as f64))).collect();
        assert!(matches!(fit_phase_metric(&traj), Err(Error::DegenerateScene(_))));
    }

    #[test]
    fn centers_are_spike_conditioned_means() {
        let traj = vec![pt(1.0, 1.0, 1.0, 1.0), pt(3.0, 5.0, 1.0, 1.0), pt(0.0, 0.0, 0.0, 0.0)];
        let m = PhaseMetric { scales: [1.0; 4] };
        let log = vec![nspike(0, 0), nspike(1, 0), nspike(1, 1)];
        let f = receptive_centers(&log, &traj, &m, 3);
        assert_eq!(f.centers[0].center, [2.0, 3.0, 1.0, 1.0]);
        assert_eq!(f.centers[0].support, 2);
        assert_eq!(f.centers[1].center, [3.0, 5.0, 1.0, 1.0]);
        assert_eq!(f.silent, vec![2]);
    }

    #[test]
    fn predictions_weight_by_spike_count() {
        let centers = vec![
            ReceptiveCenter { neuron_id: 0, center: [1.0, 0.0, 0.0, 0.0], support: 1 },
            ReceptiveCenter { neuron_id: 1, center: [0.0, 4.0, 0.0, 0.0], support: 1 },
        ];
        let log = vec![nspike(100, 0), nspike(101, 1), nspike(102, 1), nspike(103, 1), nspike(150, 1), nspike(150, 1)];
        let p = predict_positions(&log, &centers, 100, 220, 40);
        assert_eq!(p.len(), 3);
        assert_eq!(p[0], Some([0.25, 3.0, 0.0, 0.0]));
        assert_eq!(p[1], Some([0.0, 4.0, 0.0, 0.0]));
        assert_eq!(p[2], None);
    }

    #[test]
    fn msd_reference_points() {
        let truth = vec![[1.0, 0.0, 0.0, 0.0], [-1.0, 2.0, 0.0, 1.0], [0.0, 0.0, 3.0, 0.0]];
        let c = [0.5, 0.5, 0.5, 0.5];
        let perfect: Vec<_> = truth.iter().map(|t| Some(*t)).collect();
        assert_eq!(normalized_msd(&perfect, &truth, &c).unwrap().normalized_msd, 0.0);
        let central = vec![Some(c); 3];
        assert!((normalized_msd(&central, &truth, &c).unwrap().normalized_msd - 1.0).abs() < 1e-12);
        let v = [0.1, -0.2, 0.3, 0.0];
        let shifted: Vec<_> = truth.iter().map(|t| Some([t[0] + v[0], t[1] + v[1], t[2] + v[2], t[3] + v[3]])).collect();
        let den: f64 = truth.iter().map(|t| sq_dist(t, &c)).sum::<f64>() / 3.0;
        let got = normalized_msd(&shifted, &truth, &c).unwrap().normalized_msd;
        assert!((got - sq_dist(&v, &[0.0; 4]) / den).abs() < 1e-12);
        let none = vec![None; 3];
        assert!(matches!(normalized_msd(&none, &truth, &c), Err(Error::NoPredictions)));
        let partial = vec![Some(truth[0]), None, None];
        let s = normalized_msd(&partial, &truth, &c).unwrap();
        assert!((s.coverage - 1.0 / 3.0).abs() < 1e-12);
    }

    fn truth_two_clusters() -> GroundTruthLog {
        GroundTruthLog { intervals: vec![vec![(10, 20), (50, 60)], vec![(30, 40)]] }
    }

    #[test]
    fn perfect_recognizer_scores_one() {
        let log = vec![nspike(12, 0), nspike(55, 0), nspike(35, 1)];
        let r = cluster_recognition_report(&log, 3, &truth_two_clusters(), 0, 100, 0.5);
        assert_eq!(r.scores[0][0].f1, 1.0);
        assert_eq!(r.scores[1][1].f1, 1.0);
        assert_eq!(r.scores[2][0].f1, 0.0);
        assert_eq!(r.matching, vec![Some((0, 1.0)), Some((1, 1.0))]);
        assert_eq!(r.mean_f1, 1.0);
        assert!(r.unrecognized.is_empty() && r.redundant.is_empty() && r.ambiguous.is_empty());
    }

    #[test]
    fn report_flags() {
        // neuron 0 fires in both clusters, neuron 1 copies cluster 1
        let log = vec![nspike(12, 0), nspike(55, 0), nspike(35, 0), nspike(12, 1), nspike(55, 1)];
        let r = cluster_recognition_report(&log, 2, &truth_two_clusters(), 0, 100, 0.5);
        assert_eq!(r.ambiguous, vec![0]);
        assert_eq!(r.redundant, vec![0]);
    }

    #[test]
    fn uniform_firing_precision_matches_active_fraction() {
        let truth = truth_two_clusters();
        let log: Vec<_> = (0..100).map(|t| nspike(t, 0)).collect();
        let r = cluster_recognition_report(&log, 1, &truth, 0, 100, 0.5);
        assert!((r.scores[0][0].precision - 0.2).abs() < 1e-12);
        assert!((r.scores[0][1].precision - 0.1).abs() < 1e-12);
        assert_eq!(r.scores[0][0].recall, 1.0);
    }

    proptest! {
        #[test]
        fn msd_translation_invariant(
            pts in proptest::collection::vec(proptest::array::uniform4(-5.0f64..5.0), 2..30),
            noise in proptest::collection::vec(proptest::array::uniform4(-1.0f64..1.0), 30),
            shift in proptest::array::uniform4(-100.0f64..100.0),
        ) {
            let c = [0.3, -0.2, 0.1, 0.0];
            let preds: Vec<Option<Phase>> = pts.iter().zip(&noise).map(|(p, n)| Some([p[0]+n[0], p[1]+n[1], p[2]+n[2], p[3]+n[3]])).collect();
            let mv = |p: &Phase| [p[0]+shift[0], p[1]+shift[1], p[2]+shift[2], p[3]+shift[3]];
            let a = normalized_msd(&preds, &pts, &c);
            let b = normalized_msd(
                &preds.iter().map(|p| p.as_ref().map(mv)).collect::<Vec<_>>(),
                &pts.iter().map(mv).collect::<Vec<_>>(),
                &mv(&c),
            );
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!((a.normalized_msd - b.normalized_msd).abs() <= 1e-6 * (1.0 + a.normalized_msd));
            }
        }

        #[test]
        fn predictions_in_hull_of_centers(
            centers in proptest::collection::vec(proptest::array::uniform4(-3.0f64..3.0), 1..6),
            spikes in proptest::collection::vec((0u64..200, 0u32..6), 1..80),
        ) {
            let cs: Vec<ReceptiveCenter> = centers.iter().enumerate()
                .map(|(j, c)| ReceptiveCenter { neuron_id: j as u32, center: *c, support: 1 }).collect();
            let log: Vec<_> = spikes.iter().map(|&(t, j)| nspike(t, j)).collect();
            for p in predict_positions(&log, &cs, 0, 200, 40).into_iter().flatten() {
                // inside the bounding box of the centers (a necessary hull condition)
                for k in 0..4 {
                    let lo = centers.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min);
                    let hi = centers.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(p[k] >= lo - 1e-9 && p[k] <= hi + 1e-9);
                }
            }
        }

        #[test]
        fn metric_standardizes(xs in proptest::collection::vec(proptest::array::uniform4(-50.0f64..50.0), 3..200)) {
            let traj: Vec<_> = xs.iter().map(|a| pt(a[0], a[1], a[2], a[3])).collect();
            if let Ok(m) = fit_phase_metric(&traj) {
                let scaled: Vec<Phase> = traj.iter().map(|p| m.apply(p)).collect();
                for k in 0..4 {
                    let n = scaled.len() as f64;
                    let mean = scaled.iter().map(|s| s[k]).sum::<f64>() / n;
                    let sd = (scaled.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / n).sqrt();
                    prop_assert!((sd - 1.0).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn report_invariant_under_relabeling(
            spikes in proptest::collection::vec((0u64..100, 0u32..4), 0..60),
            perm_seed in 0usize..24,
        ) {
            let truth = truth_two_clusters();
            let mut perm: Vec<u32> = (0..4).collect();
            // a fixed permutation per seed
            for i in 0..4 { perm.swap(i, (perm_seed / (i + 1)) % 4); }
            let log: Vec<_> = spikes.iter().map(|&(t, j)| nspike(t, j)).collect();
            let relabeled: Vec<_> = spikes.iter().map(|&(t, j)| nspike(t, perm[j as usize])).collect();
            let a = cluster_recognition_report(&log, 4, &truth, 0, 100, 0.5);
            let b = cluster_recognition_report(&relabeled, 4, &truth, 0, 100, 0.5);
            for j in 0..4 {
                prop_assert_eq!(&a.scores[j], &b.scores[perm[j] as usize]);
            }
            // greedy matching breaks exact F1 ties by neuron index
            let mut f1s: Vec<f64> = a.scores.iter().flatten().map(|s| s.f1).filter(|&f| f > 0.0).collect();
            f1s.sort_by(f64::total_cmp);
            if f1s.windows(2).all(|w| w[0] != w[1]) {
                let fa: Vec<f64> = a.matching.iter().map(|m| m.map_or(0.0, |x| x.1)).collect();
                let fb: Vec<f64> = b.matching.iter().map(|m| m.map_or(0.0, |x| x.1)).collect();
                prop_assert_eq!(fa, fb);
                prop_assert_eq!(a.mean_f1, b.mean_f1);
            }
        }
    }
}
