use betaproc_bench::factor_problem;
use betaproc_core::bep::bp_bep;
use betaproc_core::bp::stick_break;
use betaproc_core::factor::run_mcmc;
use betaproc_core::powerlaw::phi_value;
use betaproc_core::{BPParams, CurveKind, RandomStream};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn sticks(c: &mut Criterion) {
    let mut g = c.benchmark_group("stick_break");
    for alpha in [0.0, 0.3, 0.6] {
        let p = BPParams::new(3.0, 1.0, alpha).unwrap();
        g.bench_with_input(BenchmarkId::new("rounds_2000", alpha), &p, |b, p| {
            let mut s = RandomStream::new(1, 0);
            b.iter(|| black_box(stick_break(p, 2000, &mut s).unwrap().len()));
        });
    }
    g.finish();
}

fn feature_matrix(c: &mut Criterion) {
    let p = BPParams::new(3.0, 1.0, 0.5).unwrap();
    c.bench_function("bp_bep_n1000_r2000", |b| {
        let mut s = RandomStream::new(2, 0);
        b.iter(|| black_box(bp_bep(&p, 1000, 2000, &mut s).unwrap().n_cols()));
    });
}

fn quadrature(c: &mut Criterion) {
    let p = BPParams::new(3.0, 1.0, 0.5).unwrap();
    let mut g = c.benchmark_group("phi_value");
    for (name, kind) in [("phi_n", CurveKind::PhiN), ("phi_t", CurveKind::PhiT), ("phi_nj_1", CurveKind::PhiNj(1))] {
        g.bench_function(name, |b| b.iter(|| black_box(phi_value(&p, kind, black_box(1e4)).unwrap().value)));
    }
    g.finish();
}

fn mcmc_sweep(c: &mut Criterion) {
    let (x, hyper, config, init) = factor_problem(100, 16);
    c.bench_function("mcmc_sweep_n100_p16", |b| {
        b.iter(|| black_box(run_mcmc(&x, &config, &hyper, init.clone()).unwrap().1.k()));
    });
}

criterion_group!(benches, sticks, feature_matrix, quadrature, mcmc_sweep);
criterion_main!(benches);
