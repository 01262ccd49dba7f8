use std::hint::black_box;

use cbond_core::analytic::build_constrained_solution;
use cbond_core::boundary::locate_conversion_boundary;
use cbond_core::ode::default_s_min;
use cbond_core::{
    lattice_value, optimal_strategy, reproduce_table1, simulate_value, solve_penalized_ode,
    LatticeConfig, ModelParams,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn market(lambda: f64, c: f64) -> ModelParams {
    ModelParams::table1(lambda, c).unwrap()
}

fn closed_form(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("closed_form");
    for lambda in [1.0, 100.0, 1e4] {
        let p = market(lambda, 0.02);
        g.bench_with_input(BenchmarkId::new("boundary", lambda), &p, |b, p| {
            b.iter(|| locate_conversion_boundary(black_box(p)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("solution", lambda), &p, |b, p| {
            b.iter(|| build_constrained_solution(black_box(p)).unwrap())
        });
    }
    g.bench_function("table1", |b| b.iter(|| reproduce_table1().unwrap()));
    g.finish();
}

fn ode(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("ode");
    g.sample_size(20);
    for (label, c) in [("case1", 0.04), ("case3", 0.02)] {
        let p = market(1.0, c);
        let s_min = default_s_min(&p);
        for n in [500usize, 2000] {
            g.bench_with_input(BenchmarkId::new(label, n), &n, |b, &n| {
                b.iter(|| solve_penalized_ode(black_box(&p), n, s_min).unwrap())
            });
        }
    }
    g.finish();
}

fn lattice(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("lattice");
    g.sample_size(10);
    let p = market(1.0, 0.02);
    for dt in [1e-2, 5e-3] {
        let cfg = LatticeConfig::for_params(&p, dt, 1e-4).unwrap();
        g.bench_with_input(BenchmarkId::new("case3", dt), &cfg, |b, cfg| {
            b.iter(|| lattice_value(&p, cfg, black_box(1.0)).unwrap())
        });
    }
    g.finish();
}

fn monte_carlo(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("monte_carlo");
    g.sample_size(10);
    let p = market(1.0, 0.02);
    let strat = optimal_strategy(&p).unwrap();
    for n in [2_000usize, 20_000] {
        g.bench_with_input(BenchmarkId::new("optimal", n), &n, |b, &n| {
            b.iter(|| simulate_value(&p, 1.0, &strat, n, 42).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, closed_form, ode, lattice, monte_carlo);
criterion_main!(benches);
