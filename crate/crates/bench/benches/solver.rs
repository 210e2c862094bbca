use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use jumphedge::solve;
use jumphedge_bench::{constants_market, credit, curved_market, insurance};

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    for n in [200, 2000, 20_000] {
        g.bench_with_input(BenchmarkId::new("constants_insurance", n), &n, |b, &n| {
            let (m, claim) = (constants_market(), insurance());
            b.iter(|| solve(&m, &claim, n).unwrap());
        });
        g.bench_with_input(BenchmarkId::new("curved_credit", n), &n, |b, &n| {
            let (m, claim) = (curved_market(), credit());
            b.iter(|| solve(&m, &claim, n).unwrap());
        });
    }
    g.finish();
}

criterion_group!(benches, solver);
criterion_main!(benches);
