use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use uav_noma::baselines::Setup;
use uav_noma::config::EnvConfig;
use uav_noma::experiment::{play_episode, Controller};
use uav_noma::parallel::{map_indices, map_indices_sequential};
use uav_noma::rng::SeedTree;

fn episodes(c: &mut Criterion) {
    let env = EnvConfig {
        slots: 100,
        ..EnvConfig::default()
    };
    let setup = Setup::default();
    let tree = SeedTree::new(7);
    let run = |e: usize| {
        play_episode(&env, setup, &Controller::Random, &tree.child(e as u64), e)
            .expect("episode runs")
            .metrics
            .throughput_bits
    };
    let mut group = c.benchmark_group("random_episodes");
    group.sample_size(10);
    for n in [4usize, 16] {
        group.bench_with_input(BenchmarkId::new("rayon", n), &n, |b, &n| {
            b.iter(|| black_box(map_indices(n, run)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| black_box(map_indices_sequential(n, run)))
        });
    }
    group.finish();
}

criterion_group!(benches, episodes);
criterion_main!(benches);
