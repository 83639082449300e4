//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`, and automatically on
//! failure). Tolerances are pinned in the assertions.

use hdrelay_core::cf::{feasibility_gap, solve_quantization_noise};
use hdrelay_core::df::df_rate;
use hdrelay_core::entropy::{gaussian_entropy, mixture_entropy, MixtureSpec};
use hdrelay_core::model::{
    line_network, Combining, KnowledgeMode, NetworkConfig, PowerAllocation, StateDistribution,
    SOURCE,
};
use hdrelay_core::protocols::{optimize_point, ProtocolKind};
use hdrelay_core::sweep::{emit_csv, run_sweep, SweepKind, SweepSpec};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn verdict(criterion: &str, ok: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn two_relay(r: f64) -> NetworkConfig {
    line_network(&[r, 1.0 - r], 4.0, 10.0, Combining::NonCoherent, 1e-3)
}

fn one_relay(r: f64) -> NetworkConfig {
    line_network(&[r], 4.0, 10.0, Combining::NonCoherent, 1e-3)
}

fn run(
    net: &NetworkConfig,
    kind: ProtocolKind,
    schedule: KnowledgeMode,
    budget: usize,
    seed: u64,
) -> f64 {
    optimize_point(net, kind, schedule, budget, seed, false)
        .unwrap()
        .rate
}

/// Criterion 1: direct-link closed form and the power-normalized baseline
/// values over network sizes 0..=6, each within 1e-4.
#[test]
fn c01_single_hop_closed_form() {
    let cfg = line_network(&[], 4.0, 10.0, Combining::NonCoherent, 1e-3);
    let mut alloc = PowerAllocation::zeros(0);
    alloc.set_nu(SOURCE, SOURCE, 1, 1.0);
    let dist = StateDistribution::new(vec![0.0, 1.0], KnowledgeMode::FixedSchedule).unwrap();
    let rb = df_rate(&cfg, &alloc, &dist, 1).unwrap();
    let mut ok = (rb.total - 3.45943).abs() <= 1e-4;
    let mut detail = format!("n0 rate {:.5}", rb.total);

    let golden = [
        3.45943, 4.39232, 4.95420, 5.35755, 5.67243, 5.93074, 6.14975,
    ];
    for (n, want) in golden.iter().enumerate() {
        let positions: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let net = line_network(&positions, 4.0, 10.0, Combining::NonCoherent, 1e-3);
        let got = optimize_point(
            &net,
            ProtocolKind::SingleHop,
            KnowledgeMode::FixedSchedule,
            1,
            0,
            true,
        )
        .unwrap()
        .rate;
        if (got - want).abs() > 1e-4 {
            ok = false;
            detail = format!("normalized single-hop n={n}: {got:.5} vs {want:.5}");
            break;
        }
    }
    verdict("01 single-hop closed form", ok, &detail);
}

/// Criterion 2: quadrature against the closed form (1e-9) across six decades
/// of variance, and against an independent trapezoid oracle (1e-6) for
/// genuine mixtures.
#[test]
fn c02_quadrature_oracle() {
    let mut worst_closed: f64 = 0.0;
    for exp in -3..=3 {
        let v = 10f64.powi(exp);
        let h = mixture_entropy(&MixtureSpec::new(vec![(1.0, v)]).unwrap()).unwrap();
        worst_closed = worst_closed.max((h - gaussian_entropy(v)).abs());
    }
    let mut worst_mix: f64 = 0.0;
    for comps in [
        vec![(0.5, 1.0), (0.5, 2.0)],
        vec![(0.3, 0.2), (0.7, 9.0)],
        vec![(0.85, 4.0), (0.15, 400.0)],
    ] {
        let h = mixture_entropy(&MixtureSpec::new(comps.clone()).unwrap()).unwrap();
        let oracle = trapezoid_entropy(&comps);
        worst_mix = worst_mix.max((h - oracle).abs());
    }
    verdict(
        "02 quadrature oracle",
        worst_closed <= 1e-9 && worst_mix <= 1e-6,
        &format!("closed-form err {worst_closed:.2e}, trapezoid err {worst_mix:.2e}"),
    );
}

fn trapezoid_entropy(comps: &[(f64, f64)]) -> f64 {
    let vmax = comps.iter().map(|c| c.1).fold(0.0f64, f64::max);
    let upper = 60.0 * vmax;
    let n = 4_000_000usize;
    let h = upper / n as f64;
    let f = |y: f64| {
        let p: f64 = comps
            .iter()
            .map(|&(w, v)| w / (std::f64::consts::PI * v) * (-y / v).exp())
            .sum();
        if p <= 0.0 {
            0.0
        } else {
            -std::f64::consts::PI * p * p.log2()
        }
    };
    let mut sum = 0.5 * (f(0.0) + f(upper));
    for i in 1..n {
        sum += f(i as f64 * h);
    }
    sum * h
}

/// Criterion 3: single-relay decode-and-forward, fixed schedule, full reuse,
/// mid-placed relay: the optimized rate lands between 4.71 and the cut-set
/// bound plus 0.01.
#[test]
fn c03_single_relay_df() {
    let net = one_relay(0.5);
    let df = run(
        &net,
        ProtocolKind::Df,
        KnowledgeMode::FixedSchedule,
        6000,
        11,
    );
    let bound = run(
        &net,
        ProtocolKind::CutSet,
        KnowledgeMode::FixedSchedule,
        6000,
        11,
    );
    let ok = df >= 4.71 && df <= bound + 0.01;
    verdict(
        "03 single-relay df",
        ok,
        &format!("df {df:.5} in [4.71, {:.5}]", bound + 0.01),
    );
}

/// Criterion 4: two-relay decode-and-forward at the midpoint reaches 6.12
/// and stays under the cut-set bound, which itself lands within 0.15 of
/// 7.49355.
#[test]
fn c04_two_relay_df_and_cutset() {
    let net = two_relay(0.5);
    let df = run(
        &net,
        ProtocolKind::Df,
        KnowledgeMode::FixedSchedule,
        20000,
        13,
    );
    let bound = run(
        &net,
        ProtocolKind::CutSet,
        KnowledgeMode::FixedSchedule,
        12000,
        13,
    );
    let ok = df >= 6.12 && df <= bound && (bound - 7.49355).abs() <= 0.15;
    verdict(
        "04 two-relay df + cutset",
        ok,
        &format!("df {df:.5}, cutset {bound:.5} (target 7.49355 +- 0.15)"),
    );
}

/// Criterion 5: two-relay compress-and-forward with both relays outside the
/// source-destination segment reaches 3.67.
#[test]
fn c05_two_relay_cf() {
    let net = two_relay(-0.5);
    let cf = run(
        &net,
        ProtocolKind::Cf,
        KnowledgeMode::FixedSchedule,
        4000,
        17,
    );
    verdict(
        "05 two-relay cf",
        cf >= 3.67,
        &format!("cf {cf:.5} (>= 3.67)"),
    );
}

/// Criterion 6: the alternating combined protocol near its best placement
/// reaches 7.33 and respects the cut-set bound.
#[test]
fn c06_combined_protocol() {
    let net = two_relay(0.43333);
    let combined = run(
        &net,
        ProtocolKind::Combined,
        KnowledgeMode::FixedSchedule,
        12000,
        19,
    );
    let bound = run(
        &net,
        ProtocolKind::CutSet,
        KnowledgeMode::FixedSchedule,
        12000,
        19,
    );
    let ok = combined >= 7.33 && combined <= bound;
    verdict(
        "06 combined protocol",
        ok,
        &format!("combined {combined:.5} (>= 7.33), cutset {bound:.5}"),
    );
}

/// Criterion 7: ordering properties on coarse grids of both line geometries:
/// random-access decode-and-forward never falls below the fixed-schedule
/// value, every protocol respects the cut-set bound, and compress-and-forward
/// never falls below the direct link.
#[test]
fn c07_ordering_properties() {
    struct Point {
        label: String,
        fixed: f64,
        random: f64,
        cf: f64,
        combined: Option<f64>,
        single: f64,
        bound: f64,
    }
    let mut jobs: Vec<(NetworkConfig, String, bool)> = Vec::new();
    for i in 0..9 {
        let r = -0.5 + i as f64 * 0.125;
        jobs.push((two_relay(r), format!("two-relay r={r:+.3}"), true));
    }
    for i in 0..9 {
        let r = -1.0 + i as f64 * 0.25;
        jobs.push((one_relay(r), format!("one-relay r={r:+.3}"), false));
    }
    let fixed_budget = 900usize;
    let points: Vec<Point> = jobs
        .par_iter()
        .map(|(net, label, has_combined)| {
            let seed = 23;
            let fixed = run(
                net,
                ProtocolKind::Df,
                KnowledgeMode::FixedSchedule,
                fixed_budget,
                seed,
            );
            // Triple budget: the random search embeds a fixed-schedule stage
            // of exactly the standalone budget with the same seed.
            let random = run(
                net,
                ProtocolKind::Df,
                KnowledgeMode::RandomAccess,
                3 * fixed_budget,
                seed,
            );
            let cf = run(
                net,
                ProtocolKind::Cf,
                KnowledgeMode::FixedSchedule,
                1500,
                seed,
            );
            let combined = has_combined.then(|| {
                run(
                    net,
                    ProtocolKind::Combined,
                    KnowledgeMode::FixedSchedule,
                    6000,
                    seed,
                )
            });
            let single = run(
                net,
                ProtocolKind::SingleHop,
                KnowledgeMode::FixedSchedule,
                1,
                seed,
            );
            let bound = run(
                net,
                ProtocolKind::CutSet,
                KnowledgeMode::FixedSchedule,
                8000,
                seed,
            );
            Point {
                label: label.clone(),
                fixed,
                random,
                cf,
                combined,
                single,
                bound,
            }
        })
        .collect();

    let mut ok = true;
    let mut detail = format!("{} grid points", points.len());
    for p in &points {
        let mut rates = vec![("df-fixed", p.fixed), ("df-random", p.random), ("cf", p.cf)];
        if let Some(c) = p.combined {
            rates.push(("combined", c));
        }
        if p.random < p.fixed - 1e-6 {
            ok = false;
            detail = format!("{}: random {:.5} < fixed {:.5}", p.label, p.random, p.fixed);
            break;
        }
        if p.cf < p.single - 1e-6 {
            ok = false;
            detail = format!("{}: cf {:.5} < single-hop {:.5}", p.label, p.cf, p.single);
            break;
        }
        for (name, rate) in rates {
            if rate > p.bound + 1e-9 {
                ok = false;
                detail = format!(
                    "{}: {name} {rate:.5} exceeds cut-set {:.5}",
                    p.label, p.bound
                );
                break;
            }
        }
        if !ok {
            break;
        }
    }
    verdict("07 ordering properties", ok, &detail);
}

/// Criterion 8: the quantization-noise solver leaves the feasibility
/// constraint tight (within 1e-6 bits) on randomized two-relay instances,
/// and matches the single-relay closed form.
#[test]
fn c08_cf_feasibility_tightness() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0usize;
    let mut worst_gap: f64 = 0.0;
    let mut instance = 0usize;
    while checked < 100 {
        instance += 1;
        let r1 = rng.random_range(-0.8..0.9);
        let r2 = rng.random_range(-0.8..0.9);
        let net = line_network(&[r1, r2], 4.0, 10.0, Combining::NonCoherent, 1e-3);
        let mut alloc = PowerAllocation::zeros(2);
        alloc.set_nu(SOURCE, SOURCE, 1, rng.random_range(0.2..1.0));
        alloc.omega[1] = rng.random_range(0.1..1.0);
        alloc.omega[2] = rng.random_range(0.1..1.0);
        let mut w = vec![0.0; 8];
        w[0b001] = rng.random_range(0.1..1.0);
        w[0b011] = rng.random_range(0.1..1.0);
        w[0b101] = rng.random_range(0.1..1.0);
        w[0b111] = rng.random_range(0.0..0.5);
        let dist = StateDistribution::from_weights(&w, KnowledgeMode::FixedSchedule).unwrap();
        let quant = solve_quantization_noise(&net, &alloc, &dist).unwrap();
        for q in 1..=2 {
            let nhat = quant.nhat[q - 1];
            if !nhat.is_finite() || nhat <= 1e-9 {
                continue; // boundary solutions carry no tightness claim
            }
            let gap = feasibility_gap(&net, &alloc, &quant, &dist, q).unwrap();
            worst_gap = worst_gap.max(gap.abs());
            checked += 1;
        }
        assert!(instance < 400, "not enough interior instances");
    }

    // Single-relay closed form: nhat = B / (2^(rhs/p_listen) - 1).
    let mut worst_rel: f64 = 0.0;
    for (r, omega, p_listen) in [(0.35, 0.8, 0.6), (0.2, 0.5, 0.4), (0.7, 1.0, 0.5)] {
        let net = one_relay(r);
        let mut alloc = PowerAllocation::zeros(1);
        alloc.set_nu(SOURCE, SOURCE, 1, 1.0);
        alloc.omega[1] = omega;
        let mut w = vec![0.0; 4];
        w[0b01] = p_listen;
        w[0b11] = 1.0 - p_listen;
        let dist = StateDistribution::from_weights(&w, KnowledgeMode::FixedSchedule).unwrap();
        let quant = solve_quantization_noise(&net, &alloc, &dist).unwrap();
        let g_s1 = r.abs().max(1e-3).powf(-4.0);
        let g_1d = (1.0 - r).abs().max(1e-3).powf(-4.0);
        let v_s1 = 10.0 * g_s1;
        let v_sd = 10.0;
        let bracket = v_s1 + 1.0 - v_s1 * v_sd / (v_sd + 1.0);
        let rhs = (1.0 - p_listen) * ((v_sd + omega * 10.0 * g_1d + 1.0) / (v_sd + 1.0)).log2();
        let closed = bracket / ((rhs / p_listen).exp2() - 1.0);
        worst_rel = worst_rel.max((quant.nhat[0] - closed).abs() / closed.abs());
    }
    verdict(
        "08 cf feasibility tightness",
        worst_gap <= 1e-6 && worst_rel <= 1e-6,
        &format!(
            "{checked} interior constraints, worst gap {worst_gap:.2e} bits, \
             closed-form rel err {worst_rel:.2e}"
        ),
    );
}

/// Criterion 9: rates strictly increase with the path loss exponent for one
/// and three equally spaced relays, and the three-relay advantage widens.
#[test]
fn c09_path_loss_trend() {
    let thetas = [2.0, 3.0, 4.0, 5.0, 6.0];
    let rates = |n: usize, kind: ProtocolKind, budget: usize| -> Vec<f64> {
        thetas
            .par_iter()
            .map(|&theta| {
                let positions: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
                let net = line_network(&positions, theta, 10.0, Combining::NonCoherent, 1e-3);
                run(&net, kind, KnowledgeMode::FixedSchedule, budget, 29)
            })
            .collect()
    };
    let mut ok = true;
    let mut detail = String::from("df and cf increasing, gap non-decreasing");
    for (kind, budget) in [(ProtocolKind::Df, 20000), (ProtocolKind::Cf, 2500)] {
        let r1 = rates(1, kind, budget);
        let r3 = rates(3, kind, budget);
        for i in 1..thetas.len() {
            if r1[i] <= r1[i - 1] || r3[i] <= r3[i - 1] {
                ok = false;
                detail = format!(
                    "{:?} not strictly increasing: n1 {:?} n3 {:?}",
                    kind, r1, r3
                );
            }
            let gap_prev = r3[i - 1] - r1[i - 1];
            let gap = r3[i] - r1[i];
            if gap < gap_prev - 1e-9 {
                ok = false;
                detail = format!("{:?} gap shrank at theta {}: {:?}", kind, thetas[i], gap);
            }
        }
    }
    verdict("09 path-loss trend", ok, &detail);
}

/// Criterion 10: a seeded sweep produces byte-identical CSV across runs.
#[test]
fn c10_sweep_determinism() {
    let mut spec = SweepSpec::defaults(SweepKind::SingleRelayDistance);
    spec.protocols = vec![ProtocolKind::Df, ProtocolKind::Cf, ProtocolKind::CutSet];
    spec.start = -0.2;
    spec.stop = 0.6;
    spec.step = 0.4;
    spec.budget = 300;
    spec.seed = 4242;
    let a = emit_csv(&run_sweep(&spec).unwrap());
    let b = emit_csv(&run_sweep(&spec).unwrap());
    verdict(
        "10 sweep determinism",
        a == b && a.lines().count() == 1 + 3 * 3,
        &format!("{} identical bytes", a.len()),
    );
}
