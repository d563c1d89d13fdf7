use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sharpbounds::{contrast_interval, grid, run_mc, validate_params, ContrastSpec, McConfig};
use sharpbounds_bench::example_margins;

fn bench_contrast(c: &mut Criterion) {
    let obs = example_margins();
    let params = validate_params(&obs, 0.1, 0.9).unwrap();
    let mut group = c.benchmark_group("contrast_interval");
    for spec in ContrastSpec::BUILTIN {
        group.bench_with_input(BenchmarkId::from_parameter(spec.name()), &spec, |b, spec| {
            b.iter(|| contrast_interval(black_box(&obs), black_box(&params), spec))
        });
    }
    group.finish();
}

fn bench_grid(c: &mut Criterion) {
    let obs = example_margins();
    let mut group = c.benchmark_group("grid");
    for steps in [5, 50, 200] {
        group.bench_with_input(BenchmarkId::from_parameter(steps), &steps, |b, &steps| {
            b.iter(|| grid(black_box(&obs), steps, &ContrastSpec::OddsRatio))
        });
    }
    group.finish();
}

fn bench_mc(c: &mut Criterion) {
    let obs = example_margins();
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    for n in [10_000, 100_000] {
        let mut config = McConfig::new(&obs, ContrastSpec::RiskDifference, 42);
        config.n_samples = n;
        group.bench_with_input(BenchmarkId::from_parameter(n), &config, |b, config| {
            b.iter(|| run_mc(black_box(&obs), config))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_contrast, bench_grid, bench_mc);
criterion_main!(benches);
