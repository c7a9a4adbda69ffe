use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use deconv::minimax::simulate_truncation_risk;
use deconv::sim::{run_replicates, BandwidthRule, CarrierSpec, Estimator, GridSpec, SimConfig};
use deconv::{cyclic_kernel, make_grid, operator_pg, wrapped_gaussian, EllipsoidSpec};

fn pools() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("default", None), ("one_thread", Some(single))]
}

fn run_in<R>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R
where
    R: Send,
{
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn bench_operator(c: &mut Criterion) {
    let grid = make_grid(8.0, 512).unwrap();
    let carrier = wrapped_gaussian(&grid, 1.0, 8).unwrap();
    let kernel = cyclic_kernel(&grid, 8).unwrap();
    let mut group = c.benchmark_group("operator_pg");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_in(&pool, || operator_pg(&carrier, &kernel).unwrap()))
        });
    }
    group.finish();
}

fn bench_replicates(c: &mut Criterion) {
    let config = SimConfig {
        carrier: CarrierSpec::GeneMixture,
        n: 1000,
        replicates: 16,
        seed: 1,
        estimator: Estimator::Kernel { bandwidth: BandwidthRule::PlugIn },
        grid: GridSpec { m_half: 10.0, n_points: 320 },
        functional_interval: [-2.0, 2.0],
    };
    let mut group = c.benchmark_group("run_replicates");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_in(&pool, || run_replicates(&config).unwrap()))
        });
    }
    group.finish();
}

fn bench_truncation(c: &mut Criterion) {
    let spec = EllipsoidSpec::new(1.0, 2.0, 100.0).unwrap();
    let mut group = c.benchmark_group("simulate_truncation_risk");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_in(&pool, || simulate_truncation_risk(&spec, 4, 10_000, 3).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_operator, bench_replicates, bench_truncation);
criterion_main!(benches);
