use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use regdbn::data::{split_by_year, synthesize, SynthSpec};
use regdbn::eval::{bootstrap_experiment, BootstrapConfig, ModelBuilder};
use regdbn::finetune::{mse_gradient, FeedforwardNet};
use regdbn::numerics::{RngStream, Scaler};
use regdbn::par::Parallelism;
use regdbn::pipeline::{Candidate, ModelKind, ModelSettings};
use regdbn::rbm::ActivationParams;

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn gradient(c: &mut Criterion) {
    let ds = synthesize(&SynthSpec::case1(1)).unwrap();
    let x = Scaler::fit(ds.features()).unwrap().apply(ds.features()).unwrap();
    let y_scaler = Scaler::fit_column(ds.targets()).unwrap();
    let y: Vec<f64> = ds.targets().iter().map(|&v| y_scaler.apply_value(0, v)).collect();
    let s = RngStream::new(1);
    let net = FeedforwardNet::random(
        &[6, 10, 10],
        ActivationParams::default(),
        |f| 1.0 / (f as f64).sqrt(),
        &mut s.child(&[0]),
        &mut s.child(&[1]),
    )
    .unwrap();

    let mut group = c.benchmark_group("mse_gradient");
    for (name, par) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mse_gradient(&net, &x, &y, par).unwrap())
        });
    }
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let mut spec = SynthSpec::case1(2);
    spec.n_rows = 900;
    let ds = synthesize(&spec).unwrap();
    let (train, test) = split_by_year(&ds, &(2000..=2006).collect::<Vec<_>>(), &[2007, 2008]).unwrap();
    let nb = Candidate {
        kind: ModelKind::Nb,
        settings: ModelSettings::default(),
    };
    let kr = Candidate {
        kind: ModelKind::Kr,
        settings: ModelSettings::default(),
    };
    let builders: [&dyn ModelBuilder; 2] = [&nb, &kr];

    let mut group = c.benchmark_group("bootstrap");
    group.sample_size(10);
    for (name, parallelism) in MODES {
        let config = BootstrapConfig {
            fractions: vec![0.25, 0.5, 1.0],
            reps: 4,
            seed: 1,
            parallelism,
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| bootstrap_experiment(&builders, &train, &test, &config).unwrap())
        });
    }
    group.finish();
}


criterion_group!(benches, gradient, bootstrap);
criterion_main!(benches);
