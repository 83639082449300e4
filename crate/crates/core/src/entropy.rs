//! Differential entropy of exponential mixtures via adaptive quadrature, and
//! the state-averaged mutual information of one message level at one
//! receiver.
//!
//! Channel outputs are circularly symmetric complex Gaussians, so the
//! squared magnitude is exponentially distributed and the entropy of a
//! variance mixture reduces to a one-dimensional improper integral.

use crate::error::Error;
use crate::model::{KnowledgeMode, StateDistribution};

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Weighted mixture of complex Gaussian variances.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    /// `(weight, variance)` pairs; weights sum to one, variances positive.
    pub components: Vec<(f64, f64)>,
}

impl MixtureSpec {
    pub fn new(components: Vec<(f64, f64)>) -> Result<Self, Error> {
        if components.is_empty() {
            return Err(Error::Domain("mixture needs at least one component".into()));
        }
        let mut sum = 0.0;
        for &(w, v) in &components {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Domain(format!(
                    "mixture weight {w} must be nonnegative"
                )));
            }
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "mixture variance {v} must be positive"
                )));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        Ok(MixtureSpec { components })
    }
}

/// Closed-form entropy of a single complex Gaussian, `log2(pi e variance)`.
pub fn gaussian_entropy(variance: f64) -> f64 {
    (std::f64::consts::PI * std::f64::consts::E * variance).log2()
}

/// Differential entropy in bits of a weighted exponential mixture of complex
/// Gaussian outputs, evaluated numerically to an absolute error well below
/// 1e-8 bits.
pub fn mixture_entropy(mix: &MixtureSpec) -> Result<f64, Error> {
    // Drop numerically irrelevant components, merge identical variances, and
    // rescale so the largest variance is one; rescaling shifts the entropy by
    // exactly the log of the scale.
    let mut comps: Vec<(f64, f64)> = mix
        .components
        .iter()
        .copied()
        .filter(|&(w, _)| w >= 1e-15)
        .collect();
    if comps.is_empty() {
        return Err(Error::Domain("all mixture weights below cutoff".into()));
    }
    comps.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(comps.len());
    for (w, v) in comps {
        match merged.last_mut() {
            Some(last) if (last.1 - v).abs() <= 1e-14 * v => last.0 += w,
            _ => merged.push((w, v)),
        }
    }
    let weight_sum: f64 = merged.iter().map(|c| c.0).sum();
    let scale = merged.last().map(|c| c.1).unwrap();
    for c in &mut merged {
        c.0 /= weight_sum;
        c.1 /= scale;
    }

    if merged.len() == 1 {
        // Single component: still integrate (callers rely on the quadrature
        // path being exercised), but the domain is small and smooth.
    }

    let upper = upper_limit(&merged);
    let mut segments: Vec<f64> = vec![0.0];
    for &(_, v) in &merged {
        for mult in [0.5, 2.0, 8.0] {
            let y = v * mult;
            if y < upper {
                segments.push(y);
            }
        }
    }
    segments.push(upper);
    segments.sort_by(f64::total_cmp);
    segments.dedup_by(|a, b| (*a - *b).abs() < 1e-300);

    let f = |y: f64| integrand(y, &merged);
    let tol_per = 1e-10 / segments.len() as f64;
    let mut total = 0.0;
    let mut err_est = 0.0;
    let mut evals = 0usize;
    for pair in segments.windows(2) {
        let (val, err, used) = adaptive_simpson(&f, pair[0], pair[1], tol_per, 400_000 - evals)?;
        total += val;
        err_est += err;
        evals += used;
    }
    let _ = err_est;
    Ok(total + scale.log2())
}

/// Integrand of the entropy integral: `-pi * p(y) * log2 p(y)` with `p` the
/// exponential mixture density in the squared magnitude.
fn integrand(y: f64, comps: &[(f64, f64)]) -> f64 {
    let mut p = 0.0;
    for &(w, v) in comps {
        p += w / (std::f64::consts::PI * v) * (-y / v).exp();
    }
    if p <= 0.0 {
        return 0.0;
    }
    -std::f64::consts::PI * p * p.log2()
}

/// Truncation point such that the discarded tail contributes less than 1e-11
/// bits, from a per-component analytic bound on `-p log2 p`.
fn upper_limit(comps: &[(f64, f64)]) -> f64 {
    // Variances are normalized so the slowest component has variance 1.
    let (w_m, v_m) = *comps.last().unwrap();
    let c_m = w_m / (std::f64::consts::PI * v_m);
    let a = c_m.log2().abs();
    let b = LOG2_E / v_m;
    let tail = |y: f64| -> f64 {
        let mut t = 0.0;
        for &(w, v) in comps {
            let c = w / (std::f64::consts::PI * v);
            t += std::f64::consts::PI * c * (-y / v).exp() * ((a + b * y) * v + b * v * v);
        }
        t
    };
    let mut y = 30.0;
    for _ in 0..64 {
        if tail(y) < 1e-11 {
            return y;
        }
        y *= 1.5;
    }
    y
}

/// Adaptive Simpson quadrature on `[a, b]` with an absolute error target.
fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_evals: usize,
) -> Result<(f64, f64, usize), Error> {
    if b <= a {
        return Ok((0.0, 0.0, 0));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let mut evals = 3usize;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);

    struct Item {
        a: f64,
        m: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    let mut stack = vec![Item {
        a,
        m,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        depth: 0,
    }];
    let mut total = 0.0;
    let mut err_total = 0.0;
    while let Some(it) = stack.pop() {
        let lm = 0.5 * (it.a + it.m);
        let rm = 0.5 * (it.m + it.b);
        let flm = f(lm);
        let frm = f(rm);
        evals += 2;
        let left = (it.m - it.a) / 6.0 * (it.fa + 4.0 * flm + it.fm);
        let right = (it.b - it.m) / 6.0 * (it.fm + 4.0 * frm + it.fb);
        let delta = left + right - it.whole;
        // Accept on the error target or once the correction is at the
        // floating-point noise floor of the local piece.
        let noise_floor = 1e-14 * (1.0 + (left + right).abs());
        if delta.abs() <= (15.0 * it.tol).max(noise_floor) || it.depth >= 60 {
            total += left + right + delta / 15.0;
            err_total += delta.abs() / 15.0;
        } else {
            if evals >= max_evals {
                return Err(Error::Numerical(format!(
                    "quadrature did not converge within {max_evals} evaluations \
                     (best error estimate {:.3e})",
                    err_total + delta.abs() / 15.0
                )));
            }
            stack.push(Item {
                a: it.a,
                m: lm,
                b: it.m,
                fa: it.fa,
                fm: flm,
                fb: it.fm,
                whole: left,
                tol: 0.5 * it.tol,
                depth: it.depth + 1,
            });
            stack.push(Item {
                a: it.m,
                m: rm,
                b: it.b,
                fa: it.fm,
                fm: frm,
                fb: it.fb,
                whole: right,
                tol: 0.5 * it.tol,
                depth: it.depth + 1,
            });
        }
    }
    Ok((total, err_total, evals))
}

/// State-averaged mutual information of message level `k` from `sender` at
/// `receiver`, with the states of `known_mask` known to the decoder.
///
/// `sigma(j, state)` must return the output variance at the receiver in the
/// given full state once the sender's message levels `1..=j` (and everything
/// else this decoding stage already knows) are subtracted.
///
/// Under a fixed schedule every state is known and each term reduces to the
/// conditional Gaussian expression `p(m) * log2(sigma_{k-1} / sigma_k)`. Under
/// random access the unknown-state uncertainty turns both entropies into
/// exponential mixtures; level 1 additionally reveals the sender's own state,
/// so its inner term averages over that state.
pub fn level_mutual_info(
    level: usize,
    sender: usize,
    receiver: usize,
    known_mask: u32,
    dist: &StateDistribution,
    sigma: impl Fn(usize, u32) -> f64,
) -> Result<f64, Error> {
    debug_assert!(level >= 1);
    let nodes = dist.num_nodes();
    let receiver_is_dest = receiver >= nodes;
    let listens = |mask: u32| -> bool { receiver_is_dest || (mask >> receiver) & 1 == 0 };

    match dist.knowledge_mode {
        KnowledgeMode::FixedSchedule => {
            let mut q = 0.0;
            for m in 0..(1u32 << nodes) {
                let p = dist.prob_mask(m);
                if p <= 0.0 || !listens(m) {
                    continue;
                }
                let before = sigma(level - 1, m);
                let after = sigma(level, m);
                q += p * (before / after).log2();
            }
            Ok(q)
        }
        KnowledgeMode::RandomAccess => {
            debug_assert!(
                level != 1 || (known_mask >> sender) & 1 == 0,
                "level-1 terms must leave the sender's state unknown"
            );
            debug_assert!(
                level == 1 || (known_mask >> sender) & 1 == 1,
                "higher-level terms require the sender's state to be known"
            );
            // Group the full states by their known-part assignment.
            let num_states = 1u32 << nodes;
            let mut q = 0.0;
            let mut seen = vec![false; num_states as usize];
            for m0 in 0..num_states {
                let assign = m0 & known_mask;
                if seen[assign as usize] {
                    continue;
                }
                seen[assign as usize] = true;
                if !receiver_is_dest && receiver < nodes && (known_mask >> receiver) & 1 == 1 {
                    if (assign >> receiver) & 1 == 1 {
                        continue; // receiver scheduled to transmit
                    }
                } else if !receiver_is_dest {
                    // The decoding structure always places a relay receiver's
                    // own state in the known set.
                    debug_assert!(false, "relay receiver outside the known-state set");
                }
                let members: Vec<u32> = (0..num_states)
                    .filter(|m| m & known_mask == assign && dist.prob_mask(*m) > 0.0)
                    .collect();
                let p_group: f64 = members.iter().map(|m| dist.prob_mask(*m)).sum();
                if p_group <= 0.0 {
                    continue;
                }
                let mixture = |lvl: usize, subset: &[u32], p_subset: f64| -> Result<f64, Error> {
                    let comps: Vec<(f64, f64)> = subset
                        .iter()
                        .map(|&m| (dist.prob_mask(m) / p_subset, sigma(lvl, m)))
                        .collect();
                    mixture_entropy(&MixtureSpec::new(comps)?)
                };
                if level == 1 {
                    let before = mixture(0, &members, p_group)?;
                    let mut after = 0.0;
                    for bit in [0u32, 1u32] {
                        let subset: Vec<u32> = members
                            .iter()
                            .copied()
                            .filter(|m| (m >> sender) & 1 == bit)
                            .collect();
                        let p_sub: f64 = subset.iter().map(|m| dist.prob_mask(*m)).sum();
                        if p_sub > 0.0 {
                            after += p_sub / p_group * mixture(1, &subset, p_sub)?;
                        }
                    }
                    q += p_group * (before - after);
                } else {
                    let before = mixture(level - 1, &members, p_group)?;
                    let after = mixture(level, &members, p_group)?;
                    q += p_group * (before - after);
                }
            }
            Ok(q)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KnowledgeMode;
    use proptest::prelude::*;

    /// Independent fine-grid trapezoid evaluation of the entropy integral
    /// with an explicit tail cutoff.
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

    #[test]
    fn single_component_matches_closed_form() {
        let mix = MixtureSpec::new(vec![(1.0, 1.0)]).unwrap();
        let h = mixture_entropy(&mix).unwrap();
        assert!((h - gaussian_entropy(1.0)).abs() < 1e-9);
        assert!((h - 3.09419).abs() < 1e-4);
        for v in [1e-3, 0.1, 7.3, 1e3] {
            let mix = MixtureSpec::new(vec![(1.0, v)]).unwrap();
            let h = mixture_entropy(&mix).unwrap();
            assert!(
                (h - gaussian_entropy(v)).abs() < 1e-9,
                "variance {v}: {h} vs {}",
                gaussian_entropy(v)
            );
        }
    }

    #[test]
    fn duplicate_components_degenerate_to_single() {
        let single = mixture_entropy(&MixtureSpec::new(vec![(1.0, 2.5)]).unwrap()).unwrap();
        let dup =
            mixture_entropy(&MixtureSpec::new(vec![(0.5, 2.5), (0.5, 2.5)]).unwrap()).unwrap();
        assert!((single - dup).abs() < 1e-12);
    }

    #[test]
    fn two_component_matches_trapezoid_oracle() {
        let comps = vec![(0.5, 1.0), (0.5, 2.0)];
        let h = mixture_entropy(&MixtureSpec::new(comps.clone()).unwrap()).unwrap();
        let oracle = trapezoid_entropy(&comps);
        assert!((h - oracle).abs() < 1e-6, "{h} vs oracle {oracle}");
        let comps = vec![(0.2, 0.3), (0.5, 4.0), (0.3, 11.0)];
        let h = mixture_entropy(&MixtureSpec::new(comps.clone()).unwrap()).unwrap();
        let oracle = trapezoid_entropy(&comps);
        assert!((h - oracle).abs() < 1e-6, "{h} vs oracle {oracle}");
    }

    #[test]
    fn wide_variance_ratios_converge() {
        let comps = vec![(0.5, 1e-6), (0.5, 1e6)];
        let h = mixture_entropy(&MixtureSpec::new(comps).unwrap()).unwrap();
        // Sandwich bounds still apply.
        let lower = 0.5 * gaussian_entropy(1e-6) + 0.5 * gaussian_entropy(1e6);
        let upper = gaussian_entropy(0.5 * 1e-6 + 0.5 * 1e6);
        assert!(h >= lower - 1e-7 && h <= upper + 1e-7);
    }

    #[test]
    fn fixed_schedule_single_state() {
        let dist = StateDistribution::new(vec![0.0, 1.0], KnowledgeMode::FixedSchedule).unwrap();
        let q = level_mutual_info(1, 0, 1, 0b11, &dist, |k, _| if k == 0 { 11.0 } else { 1.0 })
            .unwrap();
        assert!((q - 11f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn always_transmitting_receiver_gets_zero() {
        // Receiver is node 1 and transmits in every positive-probability state.
        let dist =
            StateDistribution::new(vec![0.0, 0.0, 0.5, 0.5], KnowledgeMode::FixedSchedule).unwrap();
        let q = level_mutual_info(1, 0, 1, 0b10, &dist, |_, _| 1.0).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn random_access_level1_matches_direct_composition() {
        // Two nodes (source 0, relay 1), receiver is the destination, known
        // set is the relay. Handpicked variances per (level, state).
        let probs = vec![0.15, 0.35, 0.3, 0.2];
        let dist = StateDistribution::new(probs.clone(), KnowledgeMode::RandomAccess).unwrap();
        let sig = |k: usize, m: u32| -> f64 {
            let base = [3.0, 7.0, 4.0, 9.0][m as usize];
            if k == 0 {
                base + 5.0
            } else {
                base
            }
        };
        let q = level_mutual_info(1, 0, 2, 0b10, &dist, sig).unwrap();

        // Direct composition of the definition.
        let mut expect = 0.0;
        for m1 in [0u32, 1u32] {
            let group: Vec<u32> = (0..4).filter(|m| (m >> 1) & 1 == m1).collect();
            let pg: f64 = group.iter().map(|&m| probs[m as usize]).sum();
            let before = mixture_entropy(
                &MixtureSpec::new(
                    group
                        .iter()
                        .map(|&m| (probs[m as usize] / pg, sig(0, m)))
                        .collect(),
                )
                .unwrap(),
            )
            .unwrap();
            let mut after = 0.0;
            for ms in [0u32, 1u32] {
                let m = ms | (m1 << 1);
                let p = probs[m as usize];
                after += p / pg
                    * mixture_entropy(&MixtureSpec::new(vec![(1.0, sig(1, m))]).unwrap()).unwrap();
            }
            expect += pg * (before - after);
        }
        assert!((q - expect).abs() < 1e-9, "{q} vs {expect}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn entropy_sandwich(
            w in 0.05f64..0.95,
            v1 in 0.01f64..100.0,
            ratio in 1.5f64..1e4,
        ) {
            let v2 = v1 * ratio;
            let mix = MixtureSpec::new(vec![(w, v1), (1.0 - w, v2)]).unwrap();
            let h = mixture_entropy(&mix).unwrap();
            let lower = w * gaussian_entropy(v1) + (1.0 - w) * gaussian_entropy(v2);
            let upper = gaussian_entropy(w * v1 + (1.0 - w) * v2);
            prop_assert!(h >= lower - 1e-8, "{h} < lower {lower}");
            prop_assert!(h <= upper + 1e-8, "{h} > upper {upper}");
            // Strictly inside for genuinely mixed variances.
            prop_assert!(h > lower + 1e-6 && h < upper - 1e-6);
        }

        #[test]
        fn entropy_scale_covariance(
            w in 0.05f64..0.95,
            v1 in 0.05f64..20.0,
            v2 in 0.05f64..20.0,
            c in 0.01f64..100.0,
        ) {
            let base = mixture_entropy(
                &MixtureSpec::new(vec![(w, v1), (1.0 - w, v2)]).unwrap()
            ).unwrap();
            let scaled = mixture_entropy(
                &MixtureSpec::new(vec![(w, c * v1), (1.0 - w, c * v2)]).unwrap()
            ).unwrap();
            prop_assert!((scaled - (base + c.log2())).abs() < 1e-8);
        }

        #[test]
        fn mutual_info_nonnegative(
            p in 0.05f64..0.95,
            s0 in 1.0f64..50.0,
            extra in 0.1f64..50.0,
        ) {
            // Before-variance exceeds after-variance by a positive message
            // power in every state.
            let dist = StateDistribution::new(
                vec![p, 1.0 - p],
                KnowledgeMode::RandomAccess,
            ).unwrap();
            let q = level_mutual_info(1, 0, 1, 0b0, &dist, |k, m| {
                let base = s0 + m as f64;
                if k == 0 { base + extra } else { base }
            }).unwrap();
            prop_assert!(q >= -5e-8, "q = {q}");
        }
    }
}
