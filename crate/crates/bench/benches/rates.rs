use std::hint::black_box;

use covol_bench::{constant_spec, tabulated_spec};
use covol_core::ratefn::derived::correlation_ldp_rate_manifold;
use covol_core::{ldp_rate, legendre_pointwise, mdp_rate, pointwise_conjugate};
use criterion::{criterion_group, criterion_main, Criterion};

fn pointwise(c: &mut Criterion) {
    let x = [1.2, 0.9, 0.4];
    c.bench_function("legendre_closed_form", |b| b.iter(|| legendre_pointwise(black_box(x), 0.5)));
    c.bench_function("pointwise_newton", |b| b.iter(|| pointwise_conjugate(black_box(x), 0.5)));
}

fn integrated(c: &mut Criterion) {
    let x = [1.2, 0.9, 0.4];
    let constant = constant_spec();
    let tabulated = tabulated_spec();
    c.bench_function("ldp_rate_constant", |b| b.iter(|| ldp_rate(black_box(x), &constant)));
    c.bench_function("ldp_rate_tabulated", |b| b.iter(|| ldp_rate(black_box(x), &tabulated)));
    c.bench_function("mdp_rate_tabulated", |b| b.iter(|| mdp_rate(black_box(x), &tabulated)));
    c.bench_function("correlation_ldp_manifold", |b| {
        b.iter(|| correlation_ldp_rate_manifold(black_box(0.7), &constant))
    });
}

criterion_group!(benches, pointwise, integrated);
criterion_main!(benches);
