use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fracthin::chainrule::{self, Phi};
use fracthin::solver::{Mobility, Operator};
use fracthin::{spectral, ModelParams, QuadratureSpec};
use fracthin_bench::bump;
use std::hint::black_box;

fn frac_laplacian(c: &mut Criterion) {
    let mut g = c.benchmark_group("frac_laplacian");
    for (dim, n) in [(1, 256), (1, 4096), (2, 128)] {
        let u = bump(dim, n);
        g.bench_with_input(BenchmarkId::new(format!("d{dim}"), n), &u, |b, u| {
            b.iter(|| spectral::frac_laplacian(black_box(u), 0.5).unwrap())
        });
    }
    g.finish();
}

fn rhs(c: &mut Criterion) {
    let mut g = c.benchmark_group("rhs");
    for (dim, n) in [(1, 256), (2, 64)] {
        let u = bump(dim, n);
        let params = ModelParams { d: dim, ..ModelParams::default() };
        let op = Operator::new(u.grid(), params, Mobility::Regularized, false);
        g.bench_with_input(BenchmarkId::new(format!("d{dim}"), n), &u, |b, u| {
            b.iter(|| op.rhs(black_box(u)).unwrap())
        });
    }
    g.finish();
}

fn chain_rule(c: &mut Criterion) {
    let quad = QuadratureSpec::default();
    let mut g = c.benchmark_group("chain_rule");
    g.sample_size(10);
    for n in [64, 128] {
        let u = bump(1, n);
        g.bench_with_input(BenchmarkId::new("mu0.5", n), &u, |b, u| {
            b.iter(|| chainrule::verify_chain_rule(black_box(u), &Phi::Power(2.0), 0.5, &quad).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, frac_laplacian, rhs, chain_rule);
criterion_main!(benches);
