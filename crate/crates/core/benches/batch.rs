//! Sequential versus data-parallel batch work: dataset generation and
//! random-agent rollouts over a generated dataset.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ivispar_core::engine::{run_episode, EngineConfig, RandomAgent};
use ivispar_core::generator::{generate_dataset, ComplexitySpec};
use ivispar_core::parallel;
use ivispar_core::BoardSpec;

fn grid() -> Vec<ComplexitySpec> {
    let board = BoardSpec::new(4, 4).unwrap();
    (4..=6).flat_map(|g| (6..=9).map(move |l| ComplexitySpec::new(board, g, l, 0))).collect()
}

fn job_counts() -> Vec<usize> {
    // Always compare against a pool, even on a single-core host.
    vec![1, parallel::available_jobs().max(2)]
}

fn generation(c: &mut Criterion) {
    let grid = grid();
    let mut group = c.benchmark_group("generate");
    group.sample_size(10);
    for jobs in job_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(jobs), &jobs, |b, &jobs| {
            b.iter(|| black_box(generate_dataset(&grid, 2, 11, jobs).unwrap()))
        });
    }
    group.finish();
}

fn rollouts(c: &mut Criterion) {
    let ds = generate_dataset(&grid(), 2, 11, 0).unwrap();
    let episodes: Vec<_> = ds.episodes.iter().map(|e| Arc::new(e.clone())).collect();
    let config = EngineConfig::default();
    let mut group = c.benchmark_group("random_rollouts");
    group.sample_size(10);
    for jobs in job_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(jobs), &jobs, |b, &jobs| {
            b.iter(|| {
                parallel::map(jobs, &episodes, |ep| {
                    run_episode(ep.clone(), &mut RandomAgent::new(ep, 5), &config, Arc::default()).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, generation, rollouts);
criterion_main!(benches);
