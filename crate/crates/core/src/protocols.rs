//! Optimized rate evaluation: maps each protocol onto a parameter space
//! (schedule pmf, power fractions, correlations, discrete choices) and runs
//! the shared derivative-free optimizer.

use crate::cf::{cf_rate, solve_quantization_noise};
use crate::combined::{combined_rate, quantization_feasibility, CombinedParams};
use crate::cutset::{cut_label, cutset_bound, CorrelationSpec};
use crate::df::{apply_reuse_constraint, df_rate};
use crate::error::Error;
use crate::model::{
    capacity, Combining, KnowledgeMode, NetworkConfig, PowerAllocation, StateDistribution, SOURCE,
};
use crate::optim::{optimize_rate, split_seed, ConstraintGroup, OptimizeResult, SearchSpec};

/// A protocol selectable from the command line and the sweep harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    /// Direct source-to-destination transmission.
    SingleHop,
    /// Single-level decode-and-forward, full resource reuse.
    Df,
    /// Single-level decode-and-forward, orthogonal resources (reuse factor
    /// `N+1`).
    DfNoReuse,
    /// Partial decode-and-forward with all `N+1` superposition levels.
    PartialDf,
    /// Regular-encoding compress-and-forward.
    Cf,
    /// Alternating decode/compress relays (two relays only).
    Combined,
    /// Cut-set upper bound.
    CutSet,
}

pub const PROTOCOL_NAMES: &[(&str, ProtocolKind)] = &[
    ("single-hop", ProtocolKind::SingleHop),
    ("df", ProtocolKind::Df),
    ("df-no-reuse", ProtocolKind::DfNoReuse),
    ("pdf", ProtocolKind::PartialDf),
    ("cf", ProtocolKind::Cf),
    ("combined", ProtocolKind::Combined),
    ("cutset", ProtocolKind::CutSet),
];

impl ProtocolKind {
    pub fn parse(name: &str) -> Result<Self, Error> {
        PROTOCOL_NAMES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| *k)
            .ok_or_else(|| {
                let valid: Vec<&str> = PROTOCOL_NAMES.iter().map(|(n, _)| *n).collect();
                Error::Domain(format!(
                    "unknown protocol '{name}'; valid protocols: {}",
                    valid.join(", ")
                ))
            })
    }

    pub fn name(&self) -> &'static str {
        PROTOCOL_NAMES
            .iter()
            .find(|(_, k)| k == self)
            .map(|(n, _)| *n)
            .unwrap()
    }

    /// Whether the schedule-mode flag applies to this protocol.
    pub fn supports_random_schedule(&self) -> bool {
        matches!(
            self,
            ProtocolKind::Df | ProtocolKind::DfNoReuse | ProtocolKind::PartialDf
        )
    }
}

/// Result of optimizing one protocol at one network configuration.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub rate: f64,
    /// Binding-constraint label (per-level cuts, or the binding cut set).
    pub binding: String,
    /// Objective evaluations spent.
    pub evals: usize,
}

/// Optimizes `kind` on `config` with the given schedule mode, evaluation
/// budget, and seed. `normalize_power` scales the single-hop source power by
/// `N+1` so the baseline uses the power the relays would have added.
pub fn optimize_point(
    config: &NetworkConfig,
    kind: ProtocolKind,
    schedule: KnowledgeMode,
    budget: usize,
    seed: u64,
    normalize_power: bool,
) -> Result<PointResult, Error> {
    config.validate()?;
    if schedule == KnowledgeMode::RandomAccess && !kind.supports_random_schedule() {
        return Err(Error::Domain(format!(
            "protocol '{}' supports only fixed schedules",
            kind.name()
        )));
    }
    match kind {
        ProtocolKind::SingleHop => single_hop(config, normalize_power),
        ProtocolKind::Df => df_point(config, schedule, 1, None, budget, seed),
        ProtocolKind::DfNoReuse => df_point(
            config,
            schedule,
            1,
            Some(config.num_relays + 1),
            budget,
            seed,
        ),
        ProtocolKind::PartialDf => {
            df_point(config, schedule, config.num_relays + 1, None, budget, seed)
        }
        ProtocolKind::Cf => cf_point(config, budget, seed),
        ProtocolKind::Combined => combined_point(config, budget, seed),
        ProtocolKind::CutSet => cutset_point(config, budget, seed),
    }
}

fn single_hop(config: &NetworkConfig, normalize_power: bool) -> Result<PointResult, Error> {
    let dest = config.destination();
    let gain = config.distance[SOURCE][dest].powf(-config.path_loss_exponent);
    let factor = if normalize_power {
        (config.num_relays + 1) as f64
    } else {
        1.0
    };
    let snr = factor * config.tx_power[SOURCE] * gain / config.noise_power[dest - 1];
    Ok(PointResult {
        rate: capacity(snr),
        binding: "1@d".into(),
        evals: 1,
    })
}

/// Relay decoding orders to branch over: all permutations for small
/// networks, the positional order otherwise.
fn relay_orders(n: usize) -> Vec<Vec<usize>> {
    if n <= 1 {
        return vec![(1..=n).collect()];
    }
    if n > 3 {
        return vec![(1..=n).collect()];
    }
    let mut orders = Vec::new();
    let mut items: Vec<usize> = (1..=n).collect();
    permute(&mut items, 0, &mut orders);
    orders.sort();
    orders
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

/// The decode-and-forward parameter vector: state weights followed by the
/// power-fraction dimensions of each supporter.
struct DfSpace {
    n: usize,
    num_states: usize,
    /// `(supporter, origin, level)` of each fraction dimension.
    nu_dims: Vec<(usize, usize, usize)>,
}

impl DfSpace {
    fn new(n: usize, levels: usize) -> Self {
        let mut nu_dims = Vec::new();
        for k in 1..=levels {
            nu_dims.push((SOURCE, SOURCE, k));
        }
        for j in 1..=n {
            for k in 1..=j.min(levels) {
                nu_dims.push((SOURCE, j, k));
                for i in k..=j {
                    nu_dims.push((i, j, k));
                }
            }
        }
        DfSpace {
            n,
            num_states: 1 << (n + 1),
            nu_dims,
        }
    }

    fn dim(&self) -> usize {
        self.num_states + self.nu_dims.len()
    }

    fn groups(&self) -> Vec<ConstraintGroup> {
        let mut groups = vec![ConstraintGroup::Simplex {
            dims: (0..self.num_states).collect(),
        }];
        for sup in 0..=self.n {
            let dims: Vec<usize> = self
                .nu_dims
                .iter()
                .enumerate()
                .filter(|(_, (s, _, _))| *s == sup)
                .map(|(i, _)| self.num_states + i)
                .collect();
            if !dims.is_empty() {
                groups.push(ConstraintGroup::SumCap { dims, cap: 1.0 });
            }
        }
        groups
    }

    fn decode(
        &self,
        x: &[f64],
        mode: KnowledgeMode,
        reuse: Option<usize>,
    ) -> Result<(StateDistribution, PowerAllocation), Error> {
        let dist = StateDistribution::from_weights(&x[..self.num_states], mode)?;
        let dist = match reuse {
            Some(k) => apply_reuse_constraint(&dist, k)?,
            None => dist,
        };
        let mut alloc = PowerAllocation::zeros(self.n);
        for (i, &(sup, origin, level)) in self.nu_dims.iter().enumerate() {
            alloc.set_nu(sup, origin, level, x[self.num_states + i]);
        }
        Ok((dist, alloc))
    }

    /// Structured schedule starts: source-only, everyone-on, and the
    /// alternating and round-robin patterns that relaying protocols favor.
    /// Each pattern is paired with a uniform power fill and, for layered
    /// runs, fills that concentrate the source power on one level.
    fn structured_starts(&self, levels: usize) -> Vec<Vec<f64>> {
        let uniform = 1.0 / self.nu_dims.len().max(1) as f64;
        let mut fills: Vec<Vec<f64>> = vec![vec![uniform; self.nu_dims.len()]];
        for k0 in 1..=levels {
            let fill: Vec<f64> = self
                .nu_dims
                .iter()
                .map(|&(sup, origin, level)| {
                    if sup == SOURCE && origin == SOURCE {
                        if level == k0 {
                            0.85
                        } else {
                            0.1 / levels.max(2) as f64
                        }
                    } else {
                        0.8 / levels as f64
                    }
                })
                .collect();
            fills.push(fill);
        }
        let mut out = Vec::new();
        for fill in fills {
            out.extend(self.pattern_starts(&fill));
        }
        out
    }

    fn pattern_starts(&self, nu_fill: &[f64]) -> Vec<Vec<f64>> {
        let mut patterns: Vec<Vec<(u32, f64)>> =
            vec![vec![(0b1, 1.0)], vec![((1 << (self.n + 1)) - 1, 1.0)]];
        if self.n >= 1 {
            // Even split between "source plus odd relays" and "source plus
            // even relays".
            let mut odd = 1u32;
            let mut even = 1u32;
            for j in 1..=self.n {
                if j % 2 == 1 {
                    odd |= 1 << j;
                } else {
                    even |= 1 << j;
                }
            }
            patterns.push(vec![(odd, 0.5), (even, 0.5)]);
            // Half-duplex two-phase: source alone, then all relays without
            // the source.
            let relays_only = ((1u32 << (self.n + 1)) - 1) & !1;
            patterns.push(vec![(0b1, 0.5), (relays_only, 0.5)]);
            // Round robin: one transmitter at a time.
            let share = 1.0 / (self.n + 1) as f64;
            patterns.push((0..=self.n).map(|l| (1u32 << l, share)).collect());
        }
        patterns
            .into_iter()
            .map(|pat| {
                let mut x = vec![0.0; self.dim()];
                for (mask, w) in pat {
                    x[mask as usize] = w;
                }
                x[self.num_states..].copy_from_slice(nu_fill);
                x
            })
            .collect()
    }
}

fn df_point(
    config: &NetworkConfig,
    schedule: KnowledgeMode,
    levels: usize,
    reuse: Option<usize>,
    budget: usize,
    seed: u64,
) -> Result<PointResult, Error> {
    // Staged search: single-level and fixed-schedule optima seed the larger
    // spaces, so enlarging the space (more levels, random access) never
    // loses what the smaller space already found. A random-capable system
    // can always fall back to a fixed schedule, and a layered encoder can
    // zero its upper levels, so the best stage value is achievable.
    let b = budget.max(4);
    use KnowledgeMode::{FixedSchedule as Fx, RandomAccess as Rn};
    let stages: Vec<(KnowledgeMode, usize, usize)> = match (schedule, levels > 1) {
        (Fx, false) => vec![(Fx, levels, b)],
        (Fx, true) => vec![(Fx, 1, b / 4), (Fx, levels, b - b / 4)],
        (Rn, false) => vec![(Fx, 1, b / 3), (Rn, 1, b - b / 3)],
        (Rn, true) => {
            vec![
                (Fx, 1, b / 5),
                (Fx, levels, b / 4),
                (Rn, levels, b - b / 5 - b / 4),
            ]
        }
    };
    let n = config.num_relays;
    let mut carry: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    let mut total_evals = 0usize;
    let mut best: Option<(f64, String)> = None;
    for (mode, lv, stage_budget) in stages {
        let starts: Vec<(usize, Vec<f64>)> = carry
            .iter()
            .map(|(branch, from_lv, p)| (*branch, embed_df_params(n, *from_lv, lv, p)))
            .collect();
        let out = df_search(config, mode, lv, reuse, stage_budget.max(1), seed, &starts)?;
        total_evals += out.result.evals;
        if best
            .as_ref()
            .is_none_or(|(r, _)| out.result.best_value > *r)
        {
            best = Some((out.result.best_value, out.binding.clone()));
        }
        carry.push((out.result.best_branch, lv, out.result.best_params.clone()));
    }
    let (rate, binding) = best.unwrap();
    Ok(PointResult {
        rate,
        binding,
        evals: total_evals,
    })
}

/// Re-expresses a parameter vector of one level count in the space of
/// another; power fractions of levels that do not exist in the target are
/// dropped, new ones start at zero.
fn embed_df_params(n: usize, from_levels: usize, to_levels: usize, x: &[f64]) -> Vec<f64> {
    let src = DfSpace::new(n, from_levels);
    let dst = DfSpace::new(n, to_levels);
    let mut out = vec![0.0; dst.dim()];
    out[..src.num_states].copy_from_slice(&x[..src.num_states]);
    for (i, key) in src.nu_dims.iter().enumerate() {
        if let Some(j) = dst.nu_dims.iter().position(|k| k == key) {
            out[dst.num_states + j] = x[src.num_states + i];
        }
    }
    out
}

struct DfOutcome {
    result: OptimizeResult,
    binding: String,
}

fn df_search(
    config: &NetworkConfig,
    mode: KnowledgeMode,
    levels: usize,
    reuse: Option<usize>,
    budget: usize,
    seed: u64,
    extra_starts: &[(usize, Vec<f64>)],
) -> Result<DfOutcome, Error> {
    let n = config.num_relays;
    let space = DfSpace::new(n, levels);
    let orders = relay_orders(n);
    let mut starts: Vec<(usize, Vec<f64>)> = Vec::new();
    for b in 0..orders.len() {
        for s in space.structured_starts(levels) {
            starts.push((b, s));
        }
        // Source-only corner with all power on the first level.
        let mut corner = vec![0.0; space.dim()];
        corner[0b1] = 1.0;
        corner[space.num_states] = 1.0;
        starts.push((b, corner));
    }
    starts.extend_from_slice(extra_starts);

    let spec = SearchSpec {
        bounds: vec![(0.0, 1.0); space.dim()],
        groups: space.groups(),
        branches: orders.len(),
        budget,
        seed,
        extra_starts: starts,
    };
    let result = optimize_rate(&spec, |branch, x| {
        let mut cfg = config.clone();
        cfg.relay_order = orders[branch].clone();
        match space.decode(x, mode, reuse) {
            Ok((dist, alloc)) => match df_rate(&cfg, &alloc, &dist, levels) {
                Ok(rb) => rb.total,
                Err(_) => f64::NEG_INFINITY,
            },
            Err(_) => f64::NEG_INFINITY,
        }
    })?;

    let mut cfg = config.clone();
    cfg.relay_order = orders[result.best_branch].clone();
    let (dist, alloc) = space.decode(&result.best_params, mode, reuse)?;
    let rb = df_rate(&cfg, &alloc, &dist, levels)?;
    let binding = rb.binding_label(config.destination());
    Ok(DfOutcome { result, binding })
}

fn cf_point(config: &NetworkConfig, budget: usize, seed: u64) -> Result<PointResult, Error> {
    let n = config.num_relays;
    let num_states = 1usize << (n + 1);
    let dim = num_states + 1 + n; // pmf, source fraction, broadcast fractions
    let mut groups = vec![ConstraintGroup::Simplex {
        dims: (0..num_states).collect(),
    }];
    for d in num_states..dim {
        groups.push(ConstraintGroup::SumCap {
            dims: vec![d],
            cap: 1.0,
        });
    }

    let mut starts: Vec<(usize, Vec<f64>)> = Vec::new();
    // Relay-off corner reaching the single-hop rate exactly.
    let mut corner = vec![0.0; dim];
    corner[0b1] = 1.0;
    corner[num_states] = 1.0;
    starts.push((0, corner));
    // Source always on, relays split between listening and transmitting.
    if n >= 1 {
        let mut alt = vec![0.0; dim];
        let mut odd = 1u32;
        let mut even = 1u32;
        for j in 1..=n {
            if j % 2 == 1 {
                odd |= 1 << j;
            } else {
                even |= 1 << j;
            }
        }
        alt[odd as usize] = 0.5;
        alt[even as usize] = 0.5;
        for d in num_states..dim {
            alt[d] = 1.0;
        }
        starts.push((0, alt.clone()));
        // A 70/30 listen-heavy variant.
        let mut listen_heavy = alt;
        listen_heavy[odd as usize] = 0.7;
        listen_heavy[even as usize] = 0.3;
        starts.push((0, listen_heavy));
    }

    let spec = SearchSpec {
        bounds: vec![(0.0, 1.0); dim],
        groups,
        branches: 1,
        budget,
        seed,
        extra_starts: starts,
    };
    let decode = |x: &[f64]| -> Result<(StateDistribution, PowerAllocation), Error> {
        let dist = StateDistribution::from_weights(&x[..num_states], KnowledgeMode::FixedSchedule)?;
        let mut alloc = PowerAllocation::zeros(n);
        alloc.set_nu(SOURCE, SOURCE, 1, x[num_states]);
        for j in 1..=n {
            alloc.omega[j] = x[num_states + j];
        }
        Ok((dist, alloc))
    };
    let result = optimize_rate(&spec, |_, x| match decode(x) {
        Ok((dist, alloc)) => match solve_quantization_noise(config, &alloc, &dist)
            .and_then(|quant| cf_rate(config, &alloc, &quant, &dist))
        {
            Ok(rate) => rate,
            Err(_) => f64::NEG_INFINITY,
        },
        Err(_) => f64::NEG_INFINITY,
    })?;
    Ok(PointResult {
        rate: result.best_value,
        binding: "cf".into(),
        evals: result.evals,
    })
}

fn combined_point(config: &NetworkConfig, budget: usize, seed: u64) -> Result<PointResult, Error> {
    if config.num_relays != 2 {
        return Err(Error::Domain(
            "the combined protocol requires exactly two relays".into(),
        ));
    }
    // Dimensions: p1, nu_s_s1, nu_s_s2, nu_s_11, nu_1_11, omega_2.
    // Branches: decode_interference x which physical relay decodes.
    let orders: Vec<Vec<usize>> = vec![vec![1, 2], vec![2, 1]];
    let dim = 6;
    let groups = vec![ConstraintGroup::SumCap {
        dims: vec![2, 3],
        cap: 1.0,
    }];
    let mut starts = Vec::new();
    for b in 0..4 {
        starts.push((b, vec![0.5, 1.0, 0.6, 0.2, 1.0, 1.0]));
        starts.push((b, vec![0.4, 1.0, 1.0, 0.0, 1.0, 1.0]));
    }
    let spec = SearchSpec {
        bounds: vec![(0.0, 1.0); dim],
        groups,
        branches: 4,
        budget,
        seed,
        extra_starts: starts,
    };
    let build = |branch: usize, x: &[f64]| -> (NetworkConfig, CombinedParams) {
        let mut cfg = config.clone();
        cfg.relay_order = orders[branch / 2].clone();
        let params = CombinedParams {
            p1: x[0],
            nu_s_s1: x[1],
            nu_s_s2: x[2],
            nu_s_11: x[3],
            nu_1_11: x[4],
            omega_2: x[5],
            decode_interference: branch % 2 == 0,
            nhat_2: 0.0,
        };
        (cfg, params)
    };
    let result = optimize_rate(&spec, |branch, x| {
        let (cfg, mut params) = build(branch, x);
        match quantization_feasibility(&cfg, &params) {
            Ok((_, _, lower)) => {
                params.nhat_2 = lower;
                match combined_rate(&cfg, &params) {
                    Ok(rb) => rb.total,
                    Err(_) => f64::NEG_INFINITY,
                }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    })?;
    let (cfg, mut params) = build(result.best_branch, &result.best_params);
    let (_, _, lower) = quantization_feasibility(&cfg, &params)?;
    params.nhat_2 = lower;
    let rb = combined_rate(&cfg, &params)?;
    let binding = rb.binding_label(config.destination());
    Ok(PointResult {
        rate: result.best_value,
        binding,
        evals: result.evals,
    })
}

fn cutset_point(config: &NetworkConfig, budget: usize, seed: u64) -> Result<PointResult, Error> {
    let n = config.num_relays;
    let num_states = 1usize << (n + 1);
    let coherent = config.combining == Combining::Coherent;
    let num_rho = if coherent {
        CorrelationSpec::num_pairs(n)
    } else {
        0
    };
    let dim = num_states + num_rho;
    let groups = vec![ConstraintGroup::Simplex {
        dims: (0..num_states).collect(),
    }];

    let mut starts: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut push_pattern = |pat: &[(u32, f64)]| {
        let mut x = vec![0.0; dim];
        for &(mask, w) in pat {
            x[mask as usize] = w;
        }
        starts.push((0, x));
    };
    push_pattern(&[(0b1, 1.0)]);
    if n >= 1 {
        let mut odd = 1u32;
        let mut even = 1u32;
        for j in 1..=n {
            if j % 2 == 1 {
                odd |= 1 << j;
            } else {
                even |= 1 << j;
            }
        }
        push_pattern(&[(odd, 0.5), (even, 0.5)]);
        push_pattern(&[(0b1, 0.5), (odd, 0.25), (even, 0.25)]);
    }

    let spec = SearchSpec {
        bounds: vec![(0.0, 1.0); dim],
        groups,
        branches: 1,
        budget,
        seed,
        extra_starts: starts,
    };
    let result = optimize_rate(&spec, |_, x| {
        let dist =
            match StateDistribution::from_weights(&x[..num_states], KnowledgeMode::FixedSchedule) {
                Ok(d) => d,
                Err(_) => return f64::NEG_INFINITY,
            };
        let corr = if coherent {
            match CorrelationSpec::from_coefficients(n, &x[num_states..]) {
                Ok(c) => c,
                Err(_) => return f64::NEG_INFINITY,
            }
        } else {
            CorrelationSpec::independent(n)
        };
        match cutset_bound(config, &dist, &corr) {
            Ok((b, _)) => b,
            Err(_) => f64::NEG_INFINITY,
        }
    })?;

    let dist = StateDistribution::from_weights(
        &result.best_params[..num_states],
        KnowledgeMode::FixedSchedule,
    )?;
    let corr = if coherent {
        CorrelationSpec::from_coefficients(n, &result.best_params[num_states..])?
    } else {
        CorrelationSpec::independent(n)
    };
    let (_, cut) = cutset_bound(config, &dist, &corr)?;
    Ok(PointResult {
        rate: result.best_value,
        binding: cut_label(cut, n),
        evals: result.evals,
    })
}

/// Derives the per-job seed for sweep grid points.
pub fn job_seed(base: u64, index: usize) -> u64 {
    split_seed(base, index as u64 + 1)
}
