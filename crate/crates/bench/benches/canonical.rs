use criterion::{criterion_group, criterion_main, Criterion};
use ergocap::canonical::{solve_canonical, DEFAULT_MAX_ITER, DEFAULT_TOL};
use ergocap::emi::Covariance;
use ergocap_bench::demo_stats;

fn bench_solve_canonical(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_canonical");
    for paths in [3usize, 4, 5] {
        let stats = demo_stats(paths, 0.1);
        let q = Covariance::identity(4);
        group.bench_function(format!("paths_{paths}"), |b| {
            b.iter(|| solve_canonical(&stats, &q, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_solve_canonical);
criterion_main!(benches);
