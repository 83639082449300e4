//! Partial decode-and-forward achievable rates for fixed and random
//! schedules.
//!
//! The source message is split into superimposed levels; relay `j` decodes
//! levels `1..=min(j, L)` and transmits redundancy for each of them, which
//! upstream nodes that already know a redundancy message may co-send. The
//! rate of each level is the minimum over receiver cuts of accumulated
//! mutual-information terms.

use crate::entropy::level_mutual_info;
use crate::error::Error;
use crate::model::{
    amplitude_table, MessageAmplitudeTable, MessageId, MessageSpec, NetView, NetworkConfig,
    PowerAllocation, StateDistribution, StateVector, SOURCE,
};

/// Per-level rates of a layered protocol together with the receiver cut that
/// limits each level.
#[derive(Debug, Clone)]
pub struct RateBreakdown {
    /// Rate of each message level in bits per channel use.
    pub per_level: Vec<f64>,
    /// Sum of the per-level rates.
    pub total: f64,
    /// `(level, receiver)` pairs naming the minimizing cut of each level;
    /// the destination is node `N+1`.
    pub binding: Vec<(usize, usize)>,
}

impl RateBreakdown {
    pub(crate) fn from_levels(per_level: Vec<f64>, binding: Vec<(usize, usize)>) -> Self {
        let total = per_level.iter().sum();
        RateBreakdown {
            per_level,
            total,
            binding,
        }
    }

    /// Compact label such as `1@d;2@2`, used in CSV output.
    pub fn binding_label(&self, destination: usize) -> String {
        self.binding
            .iter()
            .map(|(level, recv)| {
                if *recv == destination {
                    format!("{level}@d")
                } else {
                    format!("{level}@{recv}")
                }
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Zeroes every state with more than `floor((N+1)/k)` transmitters and
/// renormalizes; models a multihopping resource-reuse factor of `1/k`.
pub fn apply_reuse_constraint(
    dist: &StateDistribution,
    k: usize,
) -> Result<StateDistribution, Error> {
    if k < 1 {
        return Err(Error::Domain("reuse factor must be at least 1".into()));
    }
    let nodes = dist.num_nodes();
    let max_tx = nodes / k;
    let probs: Vec<f64> = (0..dist.num_states() as u32)
        .map(|m| {
            if m.count_ones() as usize > max_tx {
                0.0
            } else {
                dist.prob_mask(m)
            }
        })
        .collect();
    if probs.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Infeasible(format!(
            "reuse factor {k} removes every scheduled state"
        )));
    }
    StateDistribution::with_probs(probs, dist.knowledge_mode, Some(k))
}

/// The layered message set of the decode-and-forward protocol: the source's
/// fresh levels plus, per relay `j`, redundancy messages for levels
/// `1..=min(j, L)` co-sent by the source and relays `level..=j`.
fn df_messages(view: &NetView, alloc: &PowerAllocation, levels: usize) -> Vec<MessageSpec> {
    let n = view.num_relays();
    let mut msgs = Vec::new();
    for k in 1..=levels {
        msgs.push(MessageSpec {
            id: MessageId::Fresh { level: k },
            senders: vec![(SOURCE, alloc.nu(SOURCE, SOURCE, k))],
        });
    }
    for j in 1..=n {
        for k in 1..=j.min(levels) {
            let mut senders = vec![(SOURCE, alloc.nu(SOURCE, j, k))];
            for i in k..=j {
                senders.push((i, alloc.nu(i, j, k)));
            }
            msgs.push(MessageSpec {
                id: MessageId::Redundancy {
                    origin: j,
                    level: k,
                },
                senders,
            });
        }
    }
    msgs
}

/// Precomputed residual variances for every decoding stage.
struct DfEvaluator {
    n: usize,
    levels: usize,
    /// `sigma[origin][receiver-1][k][state]`.
    sigma: Vec<Vec<Vec<Vec<f64>>>>,
}

impl DfEvaluator {
    fn new(view: &NetView, alloc: &PowerAllocation, levels: usize) -> Self {
        let n = view.num_relays();
        let msgs = df_messages(view, alloc, levels);
        let msg_index = |origin: usize, level: usize| -> usize {
            if origin == SOURCE {
                level - 1
            } else {
                let mut idx = levels;
                for j in 1..origin {
                    idx += j.min(levels);
                }
                idx + (level - 1)
            }
        };
        let num_states = 1usize << (n + 1);
        let tables: Vec<MessageAmplitudeTable> = (0..num_states)
            .map(|m| amplitude_table(view, StateVector::new(m as u32, n + 1), &msgs))
            .collect();

        // Unknown-message sets per decoding stage. `k` is the number of the
        // origin's levels already subtracted (0..=levels).
        let unknown_mask = |origin: usize, receiver: usize, k: usize| -> u64 {
            let mut mask = 0u64;
            let mut add = |o: usize, lvl: usize| mask |= 1u64 << msg_index(o, lvl);
            if origin == SOURCE {
                // Undecoded fresh levels plus the still-unknown redundancy of
                // relays beyond the receiver.
                for lvl in (k + 1)..=levels {
                    add(SOURCE, lvl);
                }
                for j in (receiver + 1)..=n {
                    for lvl in (receiver + 1)..=j.min(levels) {
                        add(j, lvl);
                    }
                }
            } else {
                // Every fresh level, everything from relays decoded later in
                // the backward order, the origin's own not-yet-decoded
                // levels, and the unknown part of relays beyond the receiver.
                for lvl in 1..=levels {
                    add(SOURCE, lvl);
                }
                for j in 1..origin {
                    for lvl in 1..=j.min(levels) {
                        add(j, lvl);
                    }
                }
                for lvl in (k + 1)..=origin.min(levels) {
                    add(origin, lvl);
                }
                for j in (receiver + 1)..=n {
                    for lvl in (receiver + 1)..=j.min(levels) {
                        add(j, lvl);
                    }
                }
            }
            mask
        };

        let mut sigma = vec![vec![vec![vec![0.0; num_states]; levels + 1]; n + 1]; n + 1];
        for origin in 0..=n {
            for receiver in 1..=n + 1 {
                for k in 0..=levels {
                    let mask = unknown_mask(origin, receiver, k);
                    for (m, table) in tables.iter().enumerate() {
                        let power = table.power(mask, receiver);
                        sigma[origin][receiver - 1][k][m] = power + view.noise(receiver);
                    }
                }
            }
        }
        DfEvaluator { n, levels, sigma }
    }

    fn sigma_fn(&self, origin: usize, receiver: usize) -> impl Fn(usize, u32) -> f64 + '_ {
        let per_level = &self.sigma[origin][receiver - 1];
        move |k: usize, state: u32| per_level[k][state as usize]
    }
}

/// Known-state set `[from..=N]` as a node bitmask.
fn known_range(from: usize, n: usize) -> u32 {
    let mut mask = 0u32;
    for l in from..=n {
        mask |= 1 << l;
    }
    mask
}

/// Achievable decode-and-forward rate for the given schedule distribution,
/// power allocation, and number of superimposed source levels.
pub fn df_rate(
    config: &NetworkConfig,
    alloc: &PowerAllocation,
    dist: &StateDistribution,
    num_levels: usize,
) -> Result<RateBreakdown, Error> {
    let view = NetView::new(config)?;
    alloc.validate()?;
    let n = view.num_relays();
    if num_levels < 1 || num_levels > n + 1 {
        return Err(Error::Domain(format!(
            "number of levels must lie in 1..={} for {n} relays",
            n + 1
        )));
    }
    if dist.num_nodes() != n + 1 {
        return Err(Error::Domain(
            "state distribution does not match the network size".into(),
        ));
    }

    let eval = DfEvaluator::new(&view, alloc, num_levels);
    let q = |level: usize, sender: usize, receiver: usize, known: u32| -> Result<f64, Error> {
        level_mutual_info(
            level,
            sender,
            receiver,
            known,
            dist,
            eval.sigma_fn(sender, receiver),
        )
    };

    let mut per_level = Vec::with_capacity(num_levels);
    let mut binding = Vec::with_capacity(num_levels);
    for k in 1..=num_levels {
        let receivers = if k == 1 { 1..=n + 1 } else { k..=n + 1 };
        let mut best = f64::INFINITY;
        let mut best_recv = 0;
        for l in receivers {
            let mut cut = if k == 1 {
                q(1, SOURCE, l, known_range(1, n))?
            } else {
                q(k, SOURCE, l, known_range(0, n))?
            };
            let first_relay = if k == 1 { 1 } else { k };
            for j in first_relay..l.min(n + 1) {
                cut += if k == 1 {
                    q(1, j, l, known_range(j + 1, n))?
                } else {
                    q(k, j, l, known_range(j, n))?
                };
            }
            if cut < best {
                best = cut;
                best_recv = l;
            }
        }
        per_level.push(best.max(0.0));
        binding.push((k, best_recv));
    }
    let _ = (eval.n, eval.levels);
    Ok(RateBreakdown::from_levels(per_level, binding))
}
