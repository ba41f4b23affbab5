use criterion::{criterion_group, criterion_main, Criterion};
use ergocap::optimizer::{optimize_covariance, waterfill, OptimizerOptions};
use ergocap_bench::demo_stats;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Covariance evaluation time per path count, the headline cost of the
/// iterative waterfilling approach.
fn bench_optimize(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimize_covariance");
    for paths in [3usize, 4, 5] {
        let stats = demo_stats(paths, 0.1);
        let opts = OptimizerOptions::default();
        group.bench_function(format!("paths_{paths}"), |b| {
            b.iter(|| optimize_covariance(&stats, &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_waterfill(c: &mut Criterion) {
    let spectrum = DVector::from_iterator(
        4,
        [2.0, 1.0, 0.5, 0.25].iter().map(|&x| Complex64::new(x, 0.0)),
    );
    let mat = DMatrix::from_diagonal(&spectrum);
    c.bench_function("waterfill_4x4", |b| b.iter(|| waterfill(&mat).unwrap()));
}

criterion_group!(benches, bench_optimize, bench_waterfill);
criterion_main!(benches);
