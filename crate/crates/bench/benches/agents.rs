use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use minerdyn_bench::base;
use minerdyn_core::agents::{run_ensemble, simulate_population, AgentPopulation};
use minerdyn_core::RewardPolicy;
use std::hint::black_box;

fn single_run(c: &mut Criterion) {
    let p = base();
    let policy = RewardPolicy::Constant(40.0);
    let mut group = c.benchmark_group("simulate_population");
    for n in [100usize, 1000, 10000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| {
                let pop = AgentPopulation::with_fraction(n, 0.9, black_box(1)).unwrap();
                simulate_population(&p, &policy, pop, 5.0, 0.05).unwrap()
            })
        });
    }
    group.finish();
}

fn ensemble(c: &mut Criterion) {
    let p = base();
    let policy = RewardPolicy::Constant(40.0);
    let seeds: Vec<u64> = (0..50).collect();
    c.bench_function("run_ensemble_1000x50", |b| {
        b.iter(|| run_ensemble(&p, &policy, 1000, 0.9, None, black_box(&seeds), 5.0, 0.05).unwrap())
    });
}

criterion_group!(benches, single_run, ensemble);
criterion_main!(benches);
