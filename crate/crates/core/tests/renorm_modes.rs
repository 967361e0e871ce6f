use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scobul::plasticity::{close_if_expired, on_post_spike, on_pre_spike, periodic_renormalize};
use scobul::*;

const N: usize = 12;

fn params(renorm: RenormMode) -> PlasticityParams {
    PlasticityParams { w_min: 0.0, w_max: 1.0, tau_p: 8, d: 0.03, d_plus: 0.12, d_minus: 0.02, renorm }
}

fn neuron(rng: &mut ChaCha8Rng, p: &PlasticityParams) -> Neuron {
    let np = NeuronParams { threshold: 1.0, tau_m: 10.0, refractory: 2 };
    let plastic = (0..N as u32)
        .map(|i| {
            let r = rng.random_range(0.0..1.0);
            Synapse::plastic(i, r, p.weight_of(r))
        })
        .collect();
    Neuron::new(0, &np, plastic, vec![Synapse::inhibitory(1, -1.0)])
}

/// One step of the plasticity rules with a given spike pattern.
fn drive(n: &mut Neuron, t: Timestep, post: bool, pre: &[usize], p: &PlasticityParams) {
    close_if_expired(n, t, p);
    if post {
        on_post_spike(n, t, p);
    }
    for &k in pre {
        on_pre_spike(n, k, t, p).unwrap();
    }
}

type Trace = Vec<(bool, Vec<usize>)>;

fn trace(seed: u64, steps: usize) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| (rng.random_bool(0.03), (0..N).filter(|_| rng.random_bool(0.04)).collect()))
        .collect()
}

/// Largest per-synapse gap between the modes at the end of any interval, each
/// interval starting from the immediate-mode state.
fn worst_gap(interval: Timestep, tr: &Trace, seed: u64) -> f64 {
    let imm = params(RenormMode::Immediate);
    let per = params(RenormMode::Periodic { interval });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = neuron(&mut rng, &imm);
    let mut worst: f64 = 0.0;
    let mut b = a.clone();
    for (t, (post, pre)) in tr.iter().enumerate() {
        let t = t as Timestep;
        if t % interval == 0 {
            b = a.clone();
        }
        drive(&mut a, t, *post, pre, &imm);
        drive(&mut b, t, *post, pre, &per);
        if (t + 1) % interval == 0 {
            periodic_renormalize(&mut b, &per);
            assert!((b.total_resource() - a.total_resource()).abs() < 1e-9);
            for k in 0..N {
                worst = worst.max((a.resource(k) - b.resource(k)).abs());
            }
        }
    }
    worst
}

#[test]
fn periodic_mode_tracks_immediate_closer_with_shorter_intervals() {
    for seed in 0..5 {
        let tr = trace(seed, 20_000);
        let short = worst_gap(10, &tr, seed);
        let long = worst_gap(200, &tr, seed);
        assert!(short < long, "seed {seed}: interval 10 gap {short} vs interval 200 gap {long}");
        assert!(short < 0.2, "seed {seed}: {short}");
    }
}

#[test]
fn periodic_mode_conserves_at_renormalization_points() {
    let per = params(RenormMode::Periodic { interval: 50 });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut n = neuron(&mut rng, &per);
    let total = n.total_resource();
    for (t, (post, pre)) in trace(3, 5_000).iter().enumerate() {
        drive(&mut n, t as Timestep, *post, pre, &per);
        if (t + 1) % 50 == 0 {
            periodic_renormalize(&mut n, &per);
            assert!((n.total_resource() - total).abs() < 1e-9);
            for k in 0..N {
                assert_eq!(n.weight(k, &per), per.weight_of(n.resource(k)));
            }
        }
    }
}

#[test]
fn inhibitory_synapse_untouched_by_rules() {
    let imm = params(RenormMode::Immediate);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut n = neuron(&mut rng, &imm);
    let before = n.synapse(N).clone();
    for (t, (post, pre)) in trace(9, 5_000).iter().enumerate() {
        drive(&mut n, t as Timestep, *post, pre, &imm);
    }
    assert_eq!(n.synapse(N), &before);
    assert!(on_pre_spike(&mut n, N, 5_000, &imm).is_err());
}
