use std::f64::consts::PI;

use bcross_core::*;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn sinusoid() -> OneSidedProblem {
    OneSidedProblem::new(BoundaryCurve::constant(0.0), 1.0, BoundaryCurve::sinusoid(0.5, PI, 0.0, 1.0), 1.0)
}

fn series(c: &mut Criterion) {
    let ctrl = SeriesControl::default();
    c.bench_function("bridge_two_sided_strip", |b| {
        b.iter(|| bridge_cross_two_sided(1.0, -1.0, 0.5, black_box(1.0), black_box(0.2), &ctrl).unwrap())
    });
    c.bench_function("bridge_one_sided", |b| b.iter(|| bridge_cross_one_sided(1.0, 1.0, black_box(0.2)).unwrap()));
}

fn marginals(c: &mut Criterion) {
    let r = reduce_one_sided(&sinusoid()).unwrap();
    let k = GirsanovCoefficients::resolve(&r).unwrap();
    let quad = QuadratureControl::default();
    c.bench_function("explicit_marginal_sinusoid", |b| {
        b.iter(|| marginal(&r, &k, MarginalMethod::Explicit, &quad, None).unwrap())
    });
    let strip = TwoSidedProblem::new(
        BoundaryCurve::constant(0.0),
        1.0,
        BoundaryCurve::constant(1.0),
        BoundaryCurve::constant(-1.0),
        0.0,
        1.0,
    );
    let rs = reduce_two_sided(&strip).unwrap();
    let ks = GirsanovCoefficients::resolve(&rs).unwrap();
    c.bench_function("closed_form_strip", |b| {
        b.iter(|| closed_form_marginal(&rs, &ks, &SeriesControl::default(), &quad).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    let p = sinusoid();
    let mc = MCControl::new(10_000, 128, 1);
    g.bench_function("path_mc_10k_x_128", |b| b.iter(|| path_mc_one_sided(&p, &mc).unwrap()));
    let r = reduce_one_sided(&p).unwrap();
    let k = GirsanovCoefficients::resolve(&r).unwrap();
    g.bench_function("importance_mc_10k_x_128", |b| {
        b.iter(|| girsanov_importance_mc(&r, &k, &mc, Direction::QToP).unwrap())
    });
    g.bench_function("timesplit_8", |b| {
        b.iter(|| split_marginal(&p, &SplitControl::new(8, LocalMethod::PiecewiseLinear)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, series, marginals, simulation);
criterion_main!(benches);
