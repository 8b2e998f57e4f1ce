use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ergopt::adapt::adapted_metric;
use ergopt::birkhoff::beta_bracket;
use ergopt::cocycle::jsr_bracket;
use ergopt::props::run_suites;
use ergopt::rotation::fish_approx;
use ergopt::sampling::{rng, uniform_matrix};
use ergopt::symdyn::enumerate_necklaces;
use ergopt::{Mat, Observable, OneStepCocycle, SymbolicSystem};

fn shear_pair() -> OneStepCocycle {
    OneStepCocycle::full(vec![Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), Mat::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])]).unwrap()
}

fn symbolic(c: &mut Criterion) {
    let full = SymbolicSystem::full_shift(2).unwrap();
    let mut g = c.benchmark_group("necklaces");
    for n in [8, 12, 16] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| enumerate_necklaces(&full, n).unwrap().len()));
    }
    g.finish();
}

fn brackets(c: &mut Criterion) {
    let cos = Observable::cos_angle();
    c.bench_function("beta_bracket cos 8/12", |b| b.iter(|| beta_bracket(black_box(&cos), 8, 12).unwrap()));
    let f = shear_pair();
    let mut g = c.benchmark_group("jsr_bracket");
    for depth in [8, 12] {
        g.bench_with_input(BenchmarkId::from_parameter(depth), &depth, |b, &d| b.iter(|| jsr_bracket(black_box(&f), d).unwrap()));
    }
    g.finish();
    c.bench_function("fish 8/12", |b| b.iter(|| fish_approx(8, 12).unwrap()));
}

fn geometry(c: &mut Criterion) {
    c.bench_function("props 100 cases", |b| b.iter(|| run_suites(black_box(7), 100).unwrap()));
}

fn adapt(c: &mut Criterion) {
    let mut r = rng(7);
    let f = OneStepCocycle::full(vec![uniform_matrix(&mut r, 2, 0.5, 1.5), uniform_matrix(&mut r, 2, 0.5, 1.5)]).unwrap();
    let mut g = c.benchmark_group("adapted_metric");
    g.sample_size(10);
    for k in [2, 3] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| b.iter(|| adapted_metric(black_box(&f), k).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, symbolic, brackets, geometry, adapt);
criterion_main!(benches);
