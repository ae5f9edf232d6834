use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use qtorus_bench::{dressing, kp};
use qtorus_core::catalog::{run_check, CheckSpec, Params};
use qtorus_core::psido::{compose, invert_unit};
use qtorus_core::torus::verify_combina;

fn leibniz(c: &mut Criterion) {
    let mut group = c.benchmark_group("compose");
    for order in [4u32, 8, 12] {
        let s = dressing(order);
        let s_inv = invert_unit(&s, order).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, _| {
            b.iter(|| compose(black_box(&s), black_box(&s_inv)))
        });
    }
    group.finish();
}

fn inversion(c: &mut Criterion) {
    let mut group = c.benchmark_group("invert_unit");
    for order in [4u32, 8, 12] {
        let s = dressing(order);
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &o| {
            b.iter(|| invert_unit(black_box(&s), o).unwrap())
        });
    }
    group.finish();
}

fn flows(c: &mut Criterion) {
    let mut group = c.benchmark_group("kp");
    group.sample_size(10);
    group.bench_function("context_o8", |b| b.iter(|| kp(black_box(8))));
    group.bench_function("bracket_t11_t2_o8", |b| {
        b.iter(|| {
            let ctx = kp(8);
            let f = ctx.additional_flow(1, 1).unwrap();
            f.bracket(&ctx.sato_flow(2).unwrap())
        })
    });
    group.finish();
}

fn checks(c: &mut Criterion) {
    let mut group = c.benchmark_group("checks");
    group.sample_size(10);
    group.bench_function("combina_a2_b1_d3", |b| b.iter(|| verify_combina(2, 1, 3)));
    group.bench_function("kp_canonical_o8", |b| {
        b.iter(|| run_check(&CheckSpec::new("kp.canonical", Params::default())))
    });
    group.finish();
}

criterion_group!(benches, leibniz, inversion, flows, checks);
criterion_main!(benches);
