use std::hint::black_box;
use std::sync::Arc;

use arhgof::arh::{self, ArhSpec, KernelFamily, KernelSpec, Nonlinearity};
use arhgof::experiment::{run_experiment, ExperimentConfig};
use arhgof::gof::{self, GofOptions};
use arhgof::{Execution, Grid};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn modes() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    if Execution::default().is_parallel() {
        v.push(("parallel", Execution::default()));
    }
    v
}

fn arh1_sample(n: usize) -> arhgof::FunctionalSample {
    let spec = ArhSpec {
        kernels: vec![KernelSpec::with_norm(KernelFamily::Parabolic, 0.7)],
        nonlinearity: Nonlinearity::None,
        grid: Arc::new(Grid::uniform(101, 1.0, 0.0).unwrap()),
        burn_in: arh::DEFAULT_BURN_IN,
    };
    arh::simulate_arh(&spec, n, 11).unwrap()
}

fn bench_adot(c: &mut Criterion) {
    let x = nalgebra::DMatrix::from_fn(250, 4, |i, j| ((i * 7 + j * 13) as f64).sin());
    let mut g = c.benchmark_group("adot_n250_p4");
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| gof::adot_with(black_box(&x), exec))
        });
    }
    g.finish();
}

fn bench_gof(c: &mut Criterion) {
    let sample = arh1_sample(150);
    let mut g = c.benchmark_group("gof_arh1_n150_b500");
    g.sample_size(10);
    for (name, exec) in modes() {
        let opts = GofOptions {
            execution: exec,
            ..GofOptions::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| gof::arh_gof_test_with(black_box(&sample), 1, &opts, 3).unwrap())
        });
    }
    g.finish();
}

fn bench_monte_carlo(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        scenario: "arh0".into(),
        n: 100,
        m: 8,
        b: 100,
        z: vec![1],
        ..ExperimentConfig::default()
    };
    let mut g = c.benchmark_group("experiment_arh0_m8");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_experiment(black_box(&cfg), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_adot, bench_gof, bench_monte_carlo);
criterion_main!(benches);
