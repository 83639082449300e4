//! Two alternately transmitting relays: the first relay decodes and
//! forwards, the second compresses and forwards, on a two-phase schedule.
//!
//! Phase 1 (share `p1`): the source sends the decode-and-forward part while
//! relay 2 broadcasts the quantization index of the previous block; relay 1
//! listens. Phase 2 (share `p2`): the source sends the compress-and-forward
//! part plus support for relay 1's redundancy, relay 1 transmits that
//! redundancy, and relay 2 listens and quantizes its channel output.

use crate::cf::cov_from_table;
use crate::df::RateBreakdown;
use crate::error::Error;
use crate::model::{
    amplitude_table, capacity, MessageId, MessageSpec, NetView, NetworkConfig, StateVector, SOURCE,
};

/// Parameters of the alternating protocol.
#[derive(Debug, Clone)]
pub struct CombinedParams {
    /// Time share of phase 1; phase 2 gets `1 - p1`.
    pub p1: f64,
    /// Source power fraction on the phase-1 message.
    pub nu_s_s1: f64,
    /// Source power fraction on the phase-2 message.
    pub nu_s_s2: f64,
    /// Source power fraction supporting relay 1's redundancy (phase 2).
    pub nu_s_11: f64,
    /// Relay 1's power fraction on its redundancy (phase 2).
    pub nu_1_11: f64,
    /// Relay 2's broadcast power fraction (phase 1).
    pub omega_2: f64,
    /// Whether relay 1 decodes relay 2's broadcast instead of treating it as
    /// noise.
    pub decode_interference: bool,
    /// Quantization noise of relay 2.
    pub nhat_2: f64,
}

impl CombinedParams {
    pub fn p2(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn validate(&self) -> Result<(), Error> {
        let in_unit = |v: f64| (0.0..=1.0 + 1e-12).contains(&v);
        if !in_unit(self.p1) {
            return Err(Error::Domain(format!(
                "phase share {} outside [0,1]",
                self.p1
            )));
        }
        for (name, v) in [
            ("nu_s_s1", self.nu_s_s1),
            ("nu_s_s2", self.nu_s_s2),
            ("nu_s_11", self.nu_s_11),
            ("nu_1_11", self.nu_1_11),
            ("omega_2", self.omega_2),
        ] {
            if !in_unit(v) {
                return Err(Error::Domain(format!(
                    "fraction {name} = {v} outside [0,1]"
                )));
            }
        }
        if self.nu_s_s2 + self.nu_s_11 > 1.0 + 1e-9 {
            return Err(Error::Domain(
                "source phase-2 fractions exceed the power budget".into(),
            ));
        }
        if self.nhat_2.is_nan() || self.nhat_2 < 0.0 {
            return Err(Error::Domain(
                "quantization noise must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Second-order statistics of both phases, all expressed via the shared
/// amplitude machinery.
struct Phases {
    /// Phase 1: message 0 is the fresh part, message 1 relay 2's broadcast.
    p1_fresh_at_d: f64,
    p1_fresh_at_1: f64,
    p1_bcast_at_d: f64,
    p1_bcast_at_1: f64,
    /// Phase 2: message 0 is the fresh part, message 1 relay 1's redundancy.
    p2_table: crate::model::MessageAmplitudeTable,
    view: NetView,
}

const PHASE1_STATE: u32 = 0b101; // source and relay 2 transmit
const PHASE2_STATE: u32 = 0b011; // source and relay 1 transmit

fn build_phases(config: &NetworkConfig, params: &CombinedParams) -> Result<Phases, Error> {
    if config.num_relays != 2 {
        return Err(Error::Domain(
            "the alternating protocol requires exactly two relays".into(),
        ));
    }
    let view = NetView::new(config)?;
    params.validate()?;

    let phase1_msgs = vec![
        MessageSpec {
            id: MessageId::Fresh { level: 1 },
            senders: vec![(SOURCE, params.nu_s_s1)],
        },
        MessageSpec {
            id: MessageId::Broadcast { relay: 2 },
            senders: vec![(2, params.omega_2)],
        },
    ];
    let t1 = amplitude_table(&view, StateVector::new(PHASE1_STATE, 3), &phase1_msgs);

    let phase2_msgs = vec![
        MessageSpec {
            id: MessageId::Fresh { level: 2 },
            senders: vec![(SOURCE, params.nu_s_s2)],
        },
        MessageSpec {
            id: MessageId::Redundancy {
                origin: 1,
                level: 1,
            },
            senders: vec![(SOURCE, params.nu_s_11), (1, params.nu_1_11)],
        },
    ];
    let t2 = amplitude_table(&view, StateVector::new(PHASE2_STATE, 3), &phase2_msgs);

    Ok(Phases {
        p1_fresh_at_d: t1.power(0b01, 3),
        p1_fresh_at_1: t1.power(0b01, 1),
        p1_bcast_at_d: t1.power(0b10, 3),
        p1_bcast_at_1: t1.power(0b10, 1),
        p2_table: t2,
        view,
    })
}

/// Broadcast rates of relay 2 toward the destination and (optionally) relay
/// 1, plus the implied lower bound on the quantization noise. A dead
/// broadcast yields an infinite bound rather than an error.
pub fn quantization_feasibility(
    config: &NetworkConfig,
    params: &CombinedParams,
) -> Result<(f64, Option<f64>, f64), Error> {
    let ph = build_phases(config, params)?;
    let p1 = params.p1;
    let p2 = params.p2();
    let noise_d = ph.view.noise(3);
    let noise_1 = ph.view.noise(1);
    let noise_2 = ph.view.noise(2);

    let rhat_d = p1 * capacity(ph.p1_bcast_at_d / (noise_d + ph.p1_fresh_at_d));
    let rhat_1 = params
        .decode_interference
        .then(|| p1 * capacity(ph.p1_bcast_at_1 / (noise_1 + ph.p1_fresh_at_1)));

    if p2 <= 0.0 {
        // No quantization phase exists; the compress-and-forward leg is dead.
        return Ok((rhat_d, rhat_1, f64::INFINITY));
    }

    let bound = |rhat: f64, conditional_var: f64| -> f64 {
        if rhat <= 0.0 {
            f64::INFINITY
        } else {
            conditional_var / ((rhat / p2).exp2() - 1.0)
        }
    };

    // Conditional variance of relay 2's output given the destination output,
    // before either phase-2 message is decoded.
    let both = 0b11u64;
    let v_2 = ph.p2_table.power(both, 2);
    let v_d = ph.p2_table.power(both, 3);
    let cov = ph.p2_table.covariance(both, 2, 3);
    let bracket = v_2 + noise_2 - cov * cov / (v_d + noise_d);
    let mut lower = bound(rhat_d, bracket);

    if let Some(r1) = rhat_1 {
        // Relay 1 knows its own redundancy; only the fresh part remains.
        let fresh_at_2 = ph.p2_table.power(0b01, 2);
        lower = lower.max(bound(r1, fresh_at_2 + noise_2));
    }
    Ok((rhat_d, rhat_1, lower))
}

/// Achievable rate of the combined protocol: the decode-and-forward phase-1
/// message plus the compress-and-forward phase-2 message.
pub fn combined_rate(
    config: &NetworkConfig,
    params: &CombinedParams,
) -> Result<RateBreakdown, Error> {
    let (_, _, lower) = quantization_feasibility(config, params)?;
    if params.nhat_2 < lower * (1.0 - 1e-9) {
        return Err(Error::Domain(format!(
            "quantization noise {} below its feasibility bound {lower}",
            params.nhat_2
        )));
    }
    let ph = build_phases(config, params)?;
    let p1 = params.p1;
    let p2 = params.p2();
    let noise_d = ph.view.noise(3);
    let noise_1 = ph.view.noise(1);
    let noise_2 = ph.view.noise(2);

    // Destination cut: phase-1 direct observation plus the phase-2
    // determinant ratio of decoding relay 1's redundancy with quantizer help.
    let mut cut_d = if p1 > 0.0 {
        p1 * capacity(ph.p1_fresh_at_d / noise_d)
    } else {
        0.0
    };
    if p2 > 0.0 {
        let rows = [(2usize, params.nhat_2)];
        let k1 = cov_from_table(&ph.view, &ph.p2_table, 0b11, &rows).log2_det()?;
        let k2 = cov_from_table(&ph.view, &ph.p2_table, 0b01, &rows).log2_det()?;
        cut_d += p2 * (k1 - k2);
    }
    // Relay-1 cut: decoding the phase-1 message at relay 1, with relay 2's
    // broadcast either removed or treated as noise.
    let denom = if params.decode_interference {
        noise_1
    } else {
        noise_1 + ph.p1_bcast_at_1
    };
    let cut_relay = if p1 > 0.0 {
        p1 * capacity(ph.p1_fresh_at_1 / denom)
    } else {
        0.0
    };

    let (r_df, df_bind) = if cut_d <= cut_relay {
        (cut_d, 3usize)
    } else {
        (cut_relay, 1usize)
    };

    // Compress-and-forward part: the quantized relay observation and the
    // direct observation combine.
    let r_cf = if p2 > 0.0 {
        let fresh_at_2 = ph.p2_table.power(0b01, 2);
        let fresh_at_d = ph.p2_table.power(0b01, 3);
        let quant_snr = if params.nhat_2.is_finite() {
            fresh_at_2 / (noise_2 + params.nhat_2)
        } else {
            0.0
        };
        p2 * capacity(quant_snr + fresh_at_d / noise_d)
    } else {
        0.0
    };

    Ok(RateBreakdown::from_levels(
        vec![r_df.max(0.0), r_cf.max(0.0)],
        vec![(1, df_bind), (2, 3)],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::df::df_rate;
    use crate::model::{
        line_network, Combining, KnowledgeMode, PowerAllocation, StateDistribution,
    };

    fn two_relay_cfg(r: f64) -> NetworkConfig {
        line_network(&[r, 1.0 - r], 4.0, 10.0, Combining::NonCoherent, 1e-3)
    }

    fn base_params() -> CombinedParams {
        CombinedParams {
            p1: 0.5,
            nu_s_s1: 1.0,
            nu_s_s2: 0.6,
            nu_s_11: 0.4,
            nu_1_11: 1.0,
            omega_2: 1.0,
            decode_interference: true,
            nhat_2: 0.0,
        }
    }

    #[test]
    fn broadcast_rate_trivial_ratio() {
        // p1 C(3) = 0.5 * 2 = 1 when the broadcast-to-interference ratio is 3.
        // Engineer the geometry: broadcast power 3x the (fresh + noise) power.
        let mut cfg = two_relay_cfg(0.4);
        // Make gains selectable: relay 2 -> d at distance giving the ratio.
        cfg.tx_power = vec![10.0, 10.0, 10.0];
        let mut params = base_params();
        params.nu_s_s1 = 0.0; // no fresh interference
        params.omega_2 = 1.0;
        // Find the implied ratio and check the formula shape instead of
        // hand-tuning the geometry: V / N_d with V = 10 * g_2d.
        let (rhat_d, _, _) = quantization_feasibility(&cfg, &params).unwrap();
        let g_2d = 0.4f64.powf(-4.0);
        assert!((rhat_d - 0.5 * capacity(10.0 * g_2d)).abs() < 1e-12);
    }

    #[test]
    fn noise_bound_follows_bracket_formula() {
        // Without interference decoding the bound is exactly
        // bracket / (2^(rhat/p2) - 1); at a unit exponent it equals the
        // bracket itself.
        let cfg = two_relay_cfg(0.3);
        let mut params = base_params();
        params.decode_interference = false;
        let (rhat_d, rhat_1, lower) = quantization_feasibility(&cfg, &params).unwrap();
        assert!(rhat_1.is_none());
        let ph = build_phases(&cfg, &params).unwrap();
        let v_2 = ph.p2_table.power(0b11, 2);
        let v_d = ph.p2_table.power(0b11, 3);
        let cov = ph.p2_table.covariance(0b11, 2, 3);
        let bracket = v_2 + 1.0 - cov * cov / (v_d + 1.0);
        let expect = bracket / ((rhat_d / params.p2()).exp2() - 1.0);
        assert!((lower - expect).abs() < 1e-9 * lower.max(1.0));
        // Unit exponent: rhat equal to the phase share leaves the bracket.
        let unit = bracket / ((params.p2() / params.p2()).exp2() - 1.0);
        assert!((unit - bracket).abs() < 1e-12 * bracket.abs().max(1.0));
    }

    #[test]
    fn feasibility_bounds_match_direct_arithmetic() {
        // Symmetric placement, handpicked fractions: recompute every term by
        // direct scalar arithmetic.
        let r = 0.5;
        let cfg = two_relay_cfg(r);
        let params = CombinedParams {
            p1: 0.45,
            nu_s_s1: 0.9,
            nu_s_s2: 0.5,
            nu_s_11: 0.3,
            nu_1_11: 0.7,
            omega_2: 0.8,
            decode_interference: true,
            nhat_2: 1e9,
        };
        let (rhat_d, rhat_1, lower) = quantization_feasibility(&cfg, &params).unwrap();

        let p = 10.0;
        let g = |d: f64| d.max(1e-3).powf(-4.0);
        let g_sd = 1.0;
        let g_s1 = g(r);
        let g_s2 = g(1.0 - r);
        let g_12 = g(1.0 - 2.0 * r);
        let g_2d = g(r);
        let g_1d = g(1.0 - r);

        let v_bc_d = params.omega_2 * p * g_2d;
        let v_fresh1_d = params.nu_s_s1 * p * g_sd;
        let exp_rhat_d = 0.45 * capacity(v_bc_d / (1.0 + v_fresh1_d));
        assert!((rhat_d - exp_rhat_d).abs() < 1e-12);

        let v_bc_1 = params.omega_2 * p * g_12;
        let v_fresh1_1 = params.nu_s_s1 * p * g_s1;
        let exp_rhat_1 = 0.45 * capacity(v_bc_1 / (1.0 + v_fresh1_1));
        assert!((rhat_1.unwrap() - exp_rhat_1).abs() < 1e-12);

        // Phase-2 statistics (non-coherent).
        let v2 = params.nu_s_s2 * p * g_s2 + params.nu_s_11 * p * g_s2 + params.nu_1_11 * p * g_12;
        let vd = params.nu_s_s2 * p * g_sd + params.nu_s_11 * p * g_sd + params.nu_1_11 * p * g_1d;
        let cov = (params.nu_s_s2 * p * g_s2 * params.nu_s_s2 * p * g_sd).sqrt()
            + (params.nu_s_11 * p * g_s2 * params.nu_s_11 * p * g_sd).sqrt()
            + (params.nu_1_11 * p * g_12 * params.nu_1_11 * p * g_1d).sqrt();
        let bracket = v2 + 1.0 - cov * cov / (vd + 1.0);
        let p2 = 1.0 - 0.45;
        let b_d = bracket / ((exp_rhat_d / p2).exp2() - 1.0);
        let b_1 = (params.nu_s_s2 * p * g_s2 + 1.0) / ((exp_rhat_1 / p2).exp2() - 1.0);
        assert!(
            (lower - b_d.max(b_1)).abs() < 1e-9 * lower.max(1.0),
            "{lower}"
        );
    }

    #[test]
    fn empty_second_phase_reduces_to_direct_df() {
        let cfg = two_relay_cfg(0.4);
        let mut params = base_params();
        params.p1 = 1.0;
        params.nhat_2 = f64::INFINITY;
        let rb = combined_rate(&cfg, &params).unwrap();
        assert_eq!(rb.per_level[1], 0.0);
        let g_s1 = 0.4f64.powf(-4.0);
        let expect = capacity(10.0 / 1.0).min(capacity(10.0 * g_s1));
        assert!((rb.per_level[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn empty_first_phase_kills_df_part() {
        let cfg = two_relay_cfg(0.4);
        let mut params = base_params();
        params.p1 = 0.0;
        params.nhat_2 = f64::INFINITY; // dead broadcast forces infinite noise
        let rb = combined_rate(&cfg, &params).unwrap();
        assert_eq!(rb.per_level[0], 0.0);
        // Only the direct phase-2 observation is left.
        let expect = capacity(params.nu_s_s2 * 10.0 / 1.0);
        assert!((rb.per_level[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn decoding_interference_helps_when_interrelay_link_is_strong() {
        // Relays close together: the broadcast is easy to decode, its noise
        // bound is inactive, and removing the interference can only help the
        // relay cut.
        let cfg = two_relay_cfg(0.48);
        let mut params = base_params();
        params.nhat_2 = f64::INFINITY;
        params.decode_interference = true;
        let with_decode = combined_rate(&cfg, &params).unwrap().total;
        params.decode_interference = false;
        let as_noise = combined_rate(&cfg, &params).unwrap().total;
        assert!(
            with_decode >= as_noise - 1e-12,
            "{with_decode} vs {as_noise}"
        );
    }

    #[test]
    fn cf_part_nonincreasing_in_quantization_noise() {
        let cfg = two_relay_cfg(0.4);
        let mut params = base_params();
        let (_, _, lower) = quantization_feasibility(&cfg, &params).unwrap();
        let mut last = f64::INFINITY;
        for scale in [1.0, 2.0, 10.0, 1e3, 1e9] {
            params.nhat_2 = lower * scale;
            let rb = combined_rate(&cfg, &params).unwrap();
            assert!(rb.per_level[1] <= last + 1e-12);
            last = rb.per_level[1];
        }
    }

    #[test]
    fn infeasible_noise_is_rejected() {
        let cfg = two_relay_cfg(0.45);
        let mut params = base_params();
        params.nhat_2 = 0.0;
        let (_, _, lower) = quantization_feasibility(&cfg, &params).unwrap();
        assert!(lower > 0.0);
        assert!(combined_rate(&cfg, &params).is_err());
        params.nhat_2 = lower;
        assert!(combined_rate(&cfg, &params).is_ok());
    }

    #[test]
    fn silenced_cf_relay_matches_two_phase_df() {
        // With relay 2 silenced and no phase-2 source activity the protocol
        // degenerates to two-phase single-relay decode-and-forward, which the
        // layered evaluator reproduces exactly on a schedule whose source is
        // silent in phase 2.
        let r = 0.35;
        let cfg = two_relay_cfg(r);
        let params = CombinedParams {
            p1: 0.6,
            nu_s_s1: 0.85,
            nu_s_s2: 0.0,
            nu_s_11: 0.0,
            nu_1_11: 0.75,
            omega_2: 0.0,
            decode_interference: true,
            nhat_2: f64::INFINITY,
        };
        let combined = combined_rate(&cfg, &params).unwrap();

        let df_cfg = line_network(&[r], 4.0, 10.0, Combining::NonCoherent, 1e-3);
        let mut alloc = PowerAllocation::zeros(1);
        alloc.set_nu(SOURCE, SOURCE, 1, 0.85);
        alloc.set_nu(1, 1, 1, 0.75);
        let mut w = vec![0.0; 4];
        w[0b01] = 0.6; // phase 1: source transmits, relay listens
        w[0b10] = 0.4; // phase 2: relay transmits, source silent
        let dist = StateDistribution::from_weights(&w, KnowledgeMode::FixedSchedule).unwrap();
        let df = df_rate(&df_cfg, &alloc, &dist, 1).unwrap();
        assert!(
            (combined.total - df.total).abs() < 1e-9,
            "{} vs {}",
            combined.total,
            df.total
        );
    }
}
