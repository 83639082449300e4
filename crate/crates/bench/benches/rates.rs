//! Benchmarks of the per-point building blocks: mixture entropy quadrature,
//! the protocol rate evaluations, and a small end-to-end optimization.

use criterion::{criterion_group, criterion_main, Criterion};
use hdrelay_bench::{alternating_schedule, cf_allocation, layered_allocation, two_relay_network};
use hdrelay_core::cf::{cf_rate, solve_quantization_noise};
use hdrelay_core::combined::{combined_rate, quantization_feasibility, CombinedParams};
use hdrelay_core::cutset::{cutset_bound, CorrelationSpec};
use hdrelay_core::df::df_rate;
use hdrelay_core::entropy::{mixture_entropy, MixtureSpec};
use hdrelay_core::model::KnowledgeMode;
use hdrelay_core::protocols::{optimize_point, ProtocolKind};
use std::hint::black_box;

fn bench_mixture_entropy(c: &mut Criterion) {
    let mix =
        MixtureSpec::new(vec![(0.25, 0.8), (0.25, 3.0), (0.25, 17.0), (0.25, 160.0)]).unwrap();
    c.bench_function("mixture_entropy_4_components", |b| {
        b.iter(|| mixture_entropy(black_box(&mix)).unwrap())
    });
}

fn bench_df(c: &mut Criterion) {
    let net = two_relay_network(0.35);
    let alloc = layered_allocation();
    let fixed = alternating_schedule(KnowledgeMode::FixedSchedule);
    c.bench_function("df_rate_two_relays_fixed", |b| {
        b.iter(|| df_rate(black_box(&net), &alloc, &fixed, 3).unwrap())
    });
    let random = alternating_schedule(KnowledgeMode::RandomAccess);
    let mut group = c.benchmark_group("df_random");
    group.sample_size(20);
    group.bench_function("df_rate_two_relays_random", |b| {
        b.iter(|| df_rate(black_box(&net), &alloc, &random, 3).unwrap())
    });
    group.finish();
}

fn bench_cf(c: &mut Criterion) {
    let net = two_relay_network(0.35);
    let alloc = cf_allocation();
    let dist = alternating_schedule(KnowledgeMode::FixedSchedule);
    c.bench_function("cf_solve_and_rate_two_relays", |b| {
        b.iter(|| {
            let quant = solve_quantization_noise(black_box(&net), &alloc, &dist).unwrap();
            cf_rate(&net, &alloc, &quant, &dist).unwrap()
        })
    });
}

fn bench_combined(c: &mut Criterion) {
    let net = two_relay_network(0.43333);
    let mut params = CombinedParams {
        p1: 0.5,
        nu_s_s1: 1.0,
        nu_s_s2: 0.7,
        nu_s_11: 0.3,
        nu_1_11: 1.0,
        omega_2: 1.0,
        decode_interference: true,
        nhat_2: 0.0,
    };
    let (_, _, lower) = quantization_feasibility(&net, &params).unwrap();
    params.nhat_2 = lower;
    c.bench_function("combined_rate_point", |b| {
        b.iter(|| combined_rate(black_box(&net), &params).unwrap())
    });
}

fn bench_cutset(c: &mut Criterion) {
    let net = two_relay_network(0.4);
    let dist = alternating_schedule(KnowledgeMode::FixedSchedule);
    let corr = CorrelationSpec::independent(2);
    c.bench_function("cutset_bound_two_relays", |b| {
        b.iter(|| cutset_bound(black_box(&net), &dist, &corr).unwrap())
    });
}

fn bench_optimize(c: &mut Criterion) {
    let net = two_relay_network(0.4);
    let mut group = c.benchmark_group("optimize");
    group.sample_size(10);
    group.bench_function("optimize_df_fixed_2000_evals", |b| {
        b.iter(|| {
            optimize_point(
                black_box(&net),
                ProtocolKind::Df,
                KnowledgeMode::FixedSchedule,
                2000,
                7,
                false,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_mixture_entropy,
    bench_df,
    bench_cf,
    bench_combined,
    bench_cutset,
    bench_optimize
);
criterion_main!(benches);
