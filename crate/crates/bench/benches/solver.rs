use criterion::{criterion_group, criterion_main, Criterion};
use extremal_bench::{bubble, grid, hartree_problem, talenti_problem};
use extremal_core::energy::{el_residual, rayleigh, DEFAULT_TEST_BUMPS};
use extremal_core::solver::{solve, SolveOptions};
use extremal_core::verify::{run_battery, VerifyOptions};
use std::hint::black_box;

fn quotient(c: &mut Criterion) {
    let g = grid(2048);
    let problem = talenti_problem();
    let u = bubble(&g);
    c.bench_function("rayleigh_hardy_sobolev_2048", |b| {
        b.iter(|| rayleigh(black_box(&u), &problem).unwrap())
    });
    c.bench_function("el_residual_hardy_sobolev_2048", |b| {
        b.iter(|| el_residual(black_box(&u), &problem, DEFAULT_TEST_BUMPS).unwrap())
    });
}

fn solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    let opts = SolveOptions::default();
    let g = grid(2048);
    let talenti = talenti_problem();
    group.bench_function("talenti_2048", |b| b.iter(|| solve(&talenti, &g, &opts).unwrap()));
    let coarse = grid(512);
    let hartree = hartree_problem(1.0);
    // first call fills the kernel store
    solve(&hartree, &coarse, &opts).unwrap();
    group.bench_function("hartree_mu1_512", |b| b.iter(|| solve(&hartree, &coarse, &opts).unwrap()));
    group.finish();
}

fn battery(c: &mut Criterion) {
    let g = grid(2048);
    let problem = talenti_problem();
    let (u, _) = solve(&problem, &g, &SolveOptions::default()).unwrap();
    let opts = VerifyOptions::default();
    let mut group = c.benchmark_group("verify");
    group.sample_size(10);
    group.bench_function("battery_talenti_2048", |b| b.iter(|| run_battery(&u, &problem, &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, quotient, solves, battery);
criterion_main!(benches);
