//! Micro-benchmarks: neighbor queries, one fixed-point step, the weight
//! solve, and full paired runs.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use aa_icp::{
    run_pair, solve_alpha, AaConfig, IcpProblem, NeighborIndex, Pose6,
};
use aa_icp_bench::misaligned_pair;
use nalgebra::DVector;

fn bench_nearest_neighbor(c: &mut Criterion) {
    let mut group = c.benchmark_group("nearest_one");
    for points in [1000usize, 5000] {
        let (source, reference) = misaligned_pair(points, 3);
        let index = NeighborIndex::build(&reference).unwrap();
        let queries = source.points();
        group.bench_with_input(BenchmarkId::from_parameter(points), &points, |b, _| {
            let mut i = 0usize;
            b.iter(|| {
                let q = &queries[i % queries.len()];
                i += 1;
                black_box(index.nearest_one(q).unwrap())
            });
        });
    }
    group.finish();
}

fn bench_icp_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("icp_step");
    for points in [1000usize, 3000] {
        let (source, reference) = misaligned_pair(points, 5);
        let problem = IcpProblem::new(&source, &reference).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(points), &points, |b, _| {
            b.iter(|| black_box(problem.step(&Pose6::IDENTITY).unwrap()));
        });
    }
    group.finish();
}

fn bench_solve_alpha(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_alpha");
    for window in [2usize, 5, 10] {
        // Deterministic residual stack of the solver's real dimensionality.
        let residuals: Vec<DVector<f64>> = (0..=window)
            .map(|k| {
                DVector::from_fn(6, |r, _| ((k * 7 + r * 3 + 1) as f64 * 0.137).sin() * 0.01)
            })
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(window), &window, |b, _| {
            b.iter(|| black_box(solve_alpha(&residuals).unwrap()));
        });
    }
    group.finish();
}

fn bench_full_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_pair");
    group.sample_size(10);
    let (source, reference) = misaligned_pair(1500, 11);
    group.bench_function("picard_vs_aa_1500pts", |b| {
        b.iter(|| {
            black_box(
                run_pair(&source, &reference, &Pose6::IDENTITY, &AaConfig::default()).unwrap(),
            )
        });
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_nearest_neighbor,
    bench_icp_step,
    bench_solve_alpha,
    bench_full_runs
);
criterion_main!(benches);
