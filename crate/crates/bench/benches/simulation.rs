use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

use scobul::siggen::{gen_cluster_signal, gen_dvs_signal, ClusterSignalSpec, DvsConfig, EventStream, SceneConfig};
use scobul::*;

const STEPS: Timestep = 10_000;

fn cluster_stream() -> EventStream {
    let spec = ClusterSignalSpec::disjoint(100, 5, 10, 0.005, 0.001, 200, 0.045, 1);
    gen_cluster_signal(&spec, STEPS).unwrap().0
}

fn network(rule: PlasticityRule) -> Network {
    Network::build_wta(NetworkConfig {
        n_inputs: 100,
        n_neurons: 20,
        input_connectivity: 0.5,
        initial_resource: (0.0, 1.0),
        inhibitory_weight: -2.0,
        death_silence_threshold: Some(20_000),
        neuron: NeuronParams { threshold: 1.0, tau_m: 10.0, refractory: 5 },
        rule,
        seed: 3,
    })
    .unwrap()
}

fn simulation(c: &mut Criterion) {
    let stream = cluster_stream();
    let scobul = PlasticityRule::Scobul(PlasticityParams {
        w_min: 0.0,
        w_max: 1.0,
        tau_p: 10,
        d: 0.02,
        d_plus: 0.1,
        d_minus: 0.01,
        renorm: RenormMode::Immediate,
    });
    let stdp = PlasticityRule::Stdp(StdpParams {
        a_plus: 0.02,
        a_minus: 0.03,
        tau_plus: 10.0,
        tau_minus: 10.0,
        w_max: 1.0,
        pairing: StdpPairing::NearestNeighbor,
    });

    let mut g = c.benchmark_group("network");
    g.throughput(Throughput::Elements(STEPS));
    for (name, rule, plastic) in [("scobul", scobul, true), ("stdp", stdp, true), ("frozen", scobul, false)] {
        g.bench_function(name, |b| {
            b.iter_batched(
                || network(rule),
                |mut net| black_box(net.run(&mut stream.replay(), STEPS, plastic).unwrap().len()),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn signals(c: &mut Criterion) {
    let mut g = c.benchmark_group("signal");
    g.throughput(Throughput::Elements(STEPS));
    g.bench_function("cluster", |b| b.iter(|| black_box(cluster_stream().n_events())));
    let dvs = DvsConfig {
        width: 10,
        height: 10,
        brightness_rate_scale: 0.03,
        change_threshold: 0.05,
        target_mean_rate: 30.0,
        seed: 2,
    };
    let scene = SceneConfig { spot_radius: 1.5, speed_range: (0.01, 0.04), rearm_prob: 0.0 };
    g.bench_function("dvs", |b| b.iter(|| black_box(gen_dvs_signal(&dvs, scene, STEPS).unwrap().0.n_events())));
    g.finish();
}

fn weight_map(c: &mut Criterion) {
    let resources: Vec<f64> = (0..1024).map(|i| i as f64 / 256.0 - 1.0).collect();
    c.bench_function("resource_to_weight", |b| {
        b.iter(|| resources.iter().map(|&r| resource_to_weight(black_box(r), 0.0, 1.0)).sum::<f64>())
    });
}

criterion_group!(benches, simulation, signals, weight_map);
criterion_main!(benches);
