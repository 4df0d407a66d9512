//! Sequential against parallel particle propagation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use snapfilter::experiment::{run_once, Method, OracleKind, Problem};
use snapfilter::network::library::{dimerization, isomerization};
use snapfilter::{Exec, IntensityPlan, Pmf, Snapshot, SnapshotSeq, StreamKey, TargetingOptions};

fn single(t: f64, y: i64) -> SnapshotSeq {
    SnapshotSeq::new(vec![Snapshot { t, y: vec![y] }], 1).unwrap()
}

fn propagation(c: &mut Criterion) {
    let iso = Problem::new(
        isomerization(1.0, 1.5),
        None,
        Pmf::point_mass(vec![10, 0]),
        single(1.0, 4),
        0.7,
        OracleKind::Auto,
    )
    .unwrap();
    let dim = Problem::new(
        dimerization([0.5, 1.0, 0.1, 1.0]),
        None,
        Pmf::point_mass(vec![20, 20, 20]),
        single(1.0, 24),
        1.0,
        OracleKind::Auto,
    )
    .unwrap();
    let cases = [
        ("naive_iso", &iso, Method::Naive),
        (
            "targeting_iso",
            &iso,
            Method::Targeting(TargetingOptions::new(IntensityPlan::Rre { dt: 0.1 })),
        ),
        (
            "targeting_dim",
            &dim,
            Method::Targeting(TargetingOptions::new(IntensityPlan::Rre { dt: 0.1 })),
        ),
    ];
    let mut g = c.benchmark_group("propagation");
    g.sample_size(10);
    for (name, problem, method) in &cases {
        for (label, exec) in [
            ("sequential", Exec::Sequential),
            ("parallel", Exec::Parallel),
        ] {
            g.bench_with_input(BenchmarkId::new(*name, label), &exec, |b, &exec| {
                b.iter(|| run_once(problem, method, 2000, StreamKey::new(1), exec).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, propagation);
criterion_main!(benches);
