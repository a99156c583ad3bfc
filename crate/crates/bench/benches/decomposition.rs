use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use orderctx::decomposition::{decompose_ordered, reconstruct};
use orderctx::sim::{run_experiment, AgentSpec, ExperimentConfig, Policy, TimingDist};
use orderctx::{all_orderings, make_tsirelson, RepositoryMode};
use orderctx_bench::{mixed_2222, mixed_3_party};

fn bench_decompose(c: &mut Criterion) {
    let two = mixed_2222();
    let three = mixed_3_party();
    let order2 = all_orderings(2).remove(1);
    let order3 = all_orderings(3).remove(4);
    c.bench_function("decompose_2222", |b| {
        b.iter(|| decompose_ordered(black_box(&two), black_box(&order2)).unwrap())
    });
    c.bench_function("decompose_3_party", |b| {
        b.iter(|| decompose_ordered(black_box(&three), black_box(&order3)).unwrap())
    });
    let d = decompose_ordered(&three, &order3).unwrap();
    c.bench_function("reconstruct_3_party", |b| b.iter(|| reconstruct(black_box(&d))));
}

fn bench_simulate(c: &mut Criterion) {
    let timing = TimingDist::Uniform { t_min: 0.0, t_max: 1.0 };
    let mut config = ExperimentConfig {
        behavior: make_tsirelson(),
        agents: vec![
            AgentSpec::uniform(0, 2, timing.clone()),
            AgentSpec::uniform(1, 2, timing),
        ],
        rounds: 10_000,
        mode: RepositoryMode::Upgraded,
        policy: Policy::Force,
        seed: 1,
        parallel: false,
    };
    let mut group = c.benchmark_group("simulate_10k_rounds");
    group.sample_size(20);
    group.bench_function("sequential", |b| b.iter(|| run_experiment(black_box(&config)).unwrap()));
    config.parallel = true;
    group.bench_function("parallel", |b| b.iter(|| run_experiment(black_box(&config)).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_decompose, bench_simulate);
criterion_main!(benches);
