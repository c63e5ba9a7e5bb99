use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array1;

use scadboot::montecarlo::default_theta0;
use scadboot::penalty::lla_weight;
use scadboot::selection::{default_lambda_grid, fit_path, DEFAULT_GRID_RATIO, DEFAULT_GRID_SIZE};
use scadboot::{
    bootstrap_critical_values, lla_fit, refit, weighted_l1_subproblem, BootstrapConfig, PenaltyConfig, RefitOptions,
    SolverOptions, Support,
};
use scadboot_bench::logit_fixture;

fn subproblem(c: &mut Criterion) {
    let mut group = c.benchmark_group("weighted_l1_subproblem");
    for (n, p) in [(500, 50), (1000, 100)] {
        let (_, model) = logit_fixture(n, p, 1);
        let cfg = PenaltyConfig::new(3.7, 0.03).unwrap();
        let start = default_theta0(p).unwrap() * 0.5;
        let weights: Array1<f64> = start.mapv(|v: f64| lla_weight(v.abs(), &cfg));
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{p}")), &(), |b, _| {
            b.iter(|| weighted_l1_subproblem(&model, weights.view(), start.view(), &SolverOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn penalized_fit(c: &mut Criterion) {
    let (_, model) = logit_fixture(1000, 100, 2);
    let cfg = PenaltyConfig::new(3.7, 0.03).unwrap();
    c.bench_function("lla_fit/1000x100", |b| {
        b.iter(|| lla_fit(&model, &cfg, &SolverOptions::default()).unwrap())
    });
}

fn path(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_path");
    group.sample_size(10);
    let (_, model) = logit_fixture(500, 50, 3);
    let grid = default_lambda_grid(&model, DEFAULT_GRID_SIZE, DEFAULT_GRID_RATIO).unwrap();
    group.bench_function("500x50", |b| {
        b.iter(|| fit_path(&model, &grid, &PenaltyConfig::default(), &SolverOptions::default()).unwrap())
    });
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let mut group = c.benchmark_group("bootstrap");
    group.sample_size(10);
    let (_, model) = logit_fixture(1000, 100, 4);
    let support = Support::new((0..15).collect(), 100).unwrap();
    let fitted = refit(&model, &support, &RefitOptions::default()).unwrap();
    let bcfg = BootstrapConfig {
        n_reps: 99,
        ..BootstrapConfig::default()
    };
    group.bench_function("B99/1000x100", |b| {
        b.iter(|| bootstrap_critical_values(&model, &fitted, &bcfg, &RefitOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, subproblem, penalized_fit, path, bootstrap);
criterion_main!(benches);
