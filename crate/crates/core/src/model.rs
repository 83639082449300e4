//! Network geometry, channel gains, message bookkeeping, and the
//! second-order receive statistics (powers, covariances, residual
//! interference variances) consumed by every protocol.
//!
//! Nodes are numbered `0` (source), `1..=N` (relays), `N+1` (destination).
//! The source and the relays carry a listen/transmit state; the destination
//! always listens.

use crate::error::Error;

/// Index of the source node.
pub const SOURCE: usize = 0;

/// Shannon capacity of a scalar complex Gaussian channel, `log2(1 + snr)`.
pub fn capacity(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// How several co-senders of the same message combine at a receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combining {
    /// Phase-aligned transmission: amplitudes add before squaring.
    Coherent,
    /// Independent phases: received powers add.
    NonCoherent,
}

/// Half-duplex state of a single node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeState {
    Listen,
    Transmit,
}

/// Static description of the network: geometry, powers, noise levels.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    /// Number of relay nodes `N`.
    pub num_relays: usize,
    /// Normalized pairwise distances, `(N+2) x (N+2)`, symmetric with zero
    /// diagonal and positive off-diagonal entries.
    pub distance: Vec<Vec<f64>>,
    /// Path loss exponent, `> 0`.
    pub path_loss_exponent: f64,
    /// Linear transmit power per node `0..=N` (applies while transmitting).
    pub tx_power: Vec<f64>,
    /// Linear noise power per receiver `1..=N+1` (entry `l-1` is node `l`).
    pub noise_power: Vec<f64>,
    /// Combining mode for co-sent messages.
    pub combining: Combining,
    /// Decoding order of the relays: `relay_order[i]` is the physical relay
    /// acting as the `i+1`-th hop. Must be a permutation of `1..=N`.
    pub relay_order: Vec<usize>,
}

impl NetworkConfig {
    /// Total number of nodes including source and destination.
    pub fn num_nodes(&self) -> usize {
        self.num_relays + 2
    }

    /// Index of the destination node.
    pub fn destination(&self) -> usize {
        self.num_relays + 1
    }

    /// Checks all structural invariants.
    pub fn validate(&self) -> Result<(), Error> {
        let nn = self.num_nodes();
        if self.distance.len() != nn || self.distance.iter().any(|row| row.len() != nn) {
            return Err(Error::Domain(format!(
                "distance matrix must be {nn}x{nn} for {} relays",
                self.num_relays
            )));
        }
        for i in 0..nn {
            if self.distance[i][i] != 0.0 {
                return Err(Error::Domain("distance diagonal must be zero".into()));
            }
            for j in 0..nn {
                if i != j {
                    let d = self.distance[i][j];
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(Error::Domain(format!(
                            "distance[{i}][{j}] = {d} must be positive and finite"
                        )));
                    }
                    if (d - self.distance[j][i]).abs() > 1e-12 * d.max(1.0) {
                        return Err(Error::Domain("distance matrix must be symmetric".into()));
                    }
                }
            }
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::Domain("path loss exponent must be positive".into()));
        }
        if self.tx_power.len() != self.num_relays + 1 {
            return Err(Error::Domain(
                "tx_power must have one entry per transmitter".into(),
            ));
        }
        if self.tx_power.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain("tx powers must be nonnegative".into()));
        }
        if self.noise_power.len() != self.num_relays + 1 {
            return Err(Error::Domain(
                "noise_power must have one entry per receiver".into(),
            ));
        }
        if self.noise_power.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Domain("noise powers must be positive".into()));
        }
        let mut seen = vec![false; self.num_relays + 1];
        if self.relay_order.len() != self.num_relays {
            return Err(Error::Domain("relay_order must list every relay".into()));
        }
        for &r in &self.relay_order {
            if r == 0 || r > self.num_relays || seen[r] {
                return Err(Error::Domain(
                    "relay_order must be a permutation of 1..=N".into(),
                ));
            }
            seen[r] = true;
        }
        Ok(())
    }
}

/// Channel gain matrix `h[l'][l] = d[l'][l]^(-theta/2)`; the diagonal is unused
/// and left at zero.
pub fn build_gains(config: &NetworkConfig) -> Result<Vec<Vec<f64>>, Error> {
    config.validate()?;
    let nn = config.num_nodes();
    let mut h = vec![vec![0.0; nn]; nn];
    for a in 0..nn {
        for b in 0..nn {
            if a != b {
                h[a][b] = config.distance[a][b].powf(-config.path_loss_exponent / 2.0);
            }
        }
    }
    Ok(h)
}

/// Joint listen/transmit assignment for the source and all relays.
///
/// Stored as a bitmask: bit `l` set means node `l` transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateVector {
    mask: u32,
    nodes: usize,
}

impl StateVector {
    pub fn new(mask: u32, nodes: usize) -> Self {
        debug_assert!(nodes <= 31 && mask < (1 << nodes));
        StateVector { mask, nodes }
    }

    pub fn from_states(states: &[NodeState]) -> Self {
        let mut mask = 0u32;
        for (l, s) in states.iter().enumerate() {
            if *s == NodeState::Transmit {
                mask |= 1 << l;
            }
        }
        StateVector {
            mask,
            nodes: states.len(),
        }
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// Number of state-bearing nodes (source plus relays).
    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    /// Whether node `l` transmits; the destination (index `nodes`) never does.
    pub fn transmits(&self, node: usize) -> bool {
        node < self.nodes && (self.mask >> node) & 1 == 1
    }

    /// Whether node `l` listens; the destination always does.
    pub fn listens(&self, node: usize) -> bool {
        !self.transmits(node)
    }

    pub fn num_transmitters(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn states(&self) -> Vec<NodeState> {
        (0..self.nodes)
            .map(|l| {
                if self.transmits(l) {
                    NodeState::Transmit
                } else {
                    NodeState::Listen
                }
            })
            .collect()
    }
}

/// Iterator over all `2^nodes` joint states.
pub fn all_states(nodes: usize) -> impl Iterator<Item = StateVector> {
    (0u32..(1 << nodes)).map(move |mask| StateVector::new(mask, nodes))
}

/// Whether the decoders know the realized schedule or only its distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnowledgeMode {
    /// Deterministic, globally known schedule: rate terms are per-state
    /// conditional Gaussian expressions averaged over the time shares.
    FixedSchedule,
    /// States drawn independently each channel use: the state pattern itself
    /// carries information and entropies become exponential mixtures.
    RandomAccess,
}

/// Probability mass over joint listen/transmit states.
#[derive(Debug, Clone)]
pub struct StateDistribution {
    probs: Vec<f64>,
    nodes: usize,
    pub knowledge_mode: KnowledgeMode,
    pub reuse_factor: Option<usize>,
}

impl StateDistribution {
    /// Builds a distribution from per-state probabilities (indexed by state
    /// mask). Probabilities must be nonnegative and sum to one within 1e-12.
    pub fn new(probs: Vec<f64>, knowledge_mode: KnowledgeMode) -> Result<Self, Error> {
        if probs.is_empty() || !probs.len().is_power_of_two() {
            return Err(Error::Domain(
                "state pmf length must be a power of two".into(),
            ));
        }
        let nodes = probs.len().trailing_zeros() as usize;
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain(
                "state probabilities must be nonnegative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "state probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(StateDistribution {
            probs,
            nodes,
            knowledge_mode,
            reuse_factor: None,
        })
    }

    /// Builds a distribution by normalizing nonnegative weights. An all-zero
    /// weight vector is rejected.
    pub fn from_weights(weights: &[f64], knowledge_mode: KnowledgeMode) -> Result<Self, Error> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("state weights must be nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Domain("state weights are all zero".into()));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        // Renormalization below keeps the sum at 1 to the last ulp.
        Self::new_renormalized(probs, knowledge_mode)
    }

    fn new_renormalized(mut probs: Vec<f64>, mode: KnowledgeMode) -> Result<Self, Error> {
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        Self::new(probs, mode)
    }

    /// Point mass on a single state.
    pub fn deterministic(state: StateVector, knowledge_mode: KnowledgeMode) -> Self {
        let mut probs = vec![0.0; 1 << state.num_nodes()];
        probs[state.mask() as usize] = 1.0;
        StateDistribution {
            probs,
            nodes: state.num_nodes(),
            knowledge_mode,
            reuse_factor: None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, state: StateVector) -> f64 {
        self.probs[state.mask() as usize]
    }

    pub fn prob_mask(&self, mask: u32) -> f64 {
        self.probs[mask as usize]
    }

    /// States with positive probability.
    pub fn support(&self) -> impl Iterator<Item = (StateVector, f64)> + '_ {
        let nodes = self.nodes;
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(move |(mask, p)| (StateVector::new(mask as u32, nodes), *p))
    }

    pub(crate) fn with_probs(
        probs: Vec<f64>,
        mode: KnowledgeMode,
        reuse: Option<usize>,
    ) -> Result<Self, Error> {
        let mut d = Self::new_renormalized(probs, mode)?;
        d.reuse_factor = reuse;
        Ok(d)
    }
}

/// Power fractions: `nu[supporter][origin][level-1]` is the share of the
/// supporter's power spent on the message of the given origin and level, and
/// `omega[l]` is relay `l`'s broadcast-message share.
#[derive(Debug, Clone)]
pub struct PowerAllocation {
    nu: Vec<Vec<Vec<f64>>>,
    pub omega: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(num_relays: usize) -> Self {
        let n1 = num_relays + 1;
        PowerAllocation {
            nu: vec![vec![vec![0.0; n1]; n1]; n1],
            omega: vec![0.0; n1],
        }
    }

    /// Power fraction of `supporter` for message (`origin`, `level`).
    /// `origin == SOURCE` denotes the source's own fresh message levels.
    pub fn nu(&self, supporter: usize, origin: usize, level: usize) -> f64 {
        self.nu[supporter][origin][level - 1]
    }

    pub fn set_nu(&mut self, supporter: usize, origin: usize, level: usize, value: f64) {
        self.nu[supporter][origin][level - 1] = value;
    }

    pub fn num_relays(&self) -> usize {
        self.omega.len() - 1
    }

    /// Entries must lie in `[0,1]` and each node's fractions must sum to at
    /// most one (within 1e-9).
    pub fn validate(&self) -> Result<(), Error> {
        for (sup, per_origin) in self.nu.iter().enumerate() {
            let mut total = 0.0;
            for levels in per_origin {
                for &v in levels {
                    if !(0.0..=1.0 + 1e-12).contains(&v) {
                        return Err(Error::Domain(format!(
                            "power fraction {v} of node {sup} outside [0,1]"
                        )));
                    }
                    total += v;
                }
            }
            if total > 1.0 + 1e-9 {
                return Err(Error::Domain(format!(
                    "power fractions of node {sup} sum to {total} > 1"
                )));
            }
        }
        for &w in &self.omega {
            if !(0.0..=1.0 + 1e-12).contains(&w) {
                return Err(Error::Domain(format!(
                    "broadcast fraction {w} outside [0,1]"
                )));
            }
        }
        Ok(())
    }
}

/// Identity of a superimposed message on the air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageId {
    /// Source's own message at the given level.
    Fresh { level: usize },
    /// Redundancy for `level`, created by relay `origin`.
    Redundancy { origin: usize, level: usize },
    /// Quantization-index broadcast of a relay.
    Broadcast { relay: usize },
}

/// One message together with its co-senders and their power fractions.
#[derive(Debug, Clone)]
pub struct MessageSpec {
    pub id: MessageId,
    /// `(node, power fraction)` pairs; a sender contributes only while it
    /// transmits.
    pub senders: Vec<(usize, f64)>,
}

/// A resolved view of the network in decoding order: node `i` of the view is
/// physical node `relay_order[i-1]` for relays, and the source/destination
/// map to themselves.
#[derive(Debug, Clone)]
pub struct NetView {
    gains: Vec<Vec<f64>>,
    tx_power: Vec<f64>,
    noise_power: Vec<f64>,
    num_relays: usize,
    combining: Combining,
}

impl NetView {
    pub fn new(config: &NetworkConfig) -> Result<Self, Error> {
        let h = build_gains(config)?;
        let nn = config.num_nodes();
        let phys: Vec<usize> = std::iter::once(SOURCE)
            .chain(config.relay_order.iter().copied())
            .chain(std::iter::once(config.destination()))
            .collect();
        let mut gains = vec![vec![0.0; nn]; nn];
        for a in 0..nn {
            for b in 0..nn {
                if a != b {
                    gains[a][b] = h[phys[a]][phys[b]];
                }
            }
        }
        let tx_power = (0..=config.num_relays)
            .map(|l| config.tx_power[phys[l]])
            .collect();
        let noise_power = (1..=config.num_relays + 1)
            .map(|l| config.noise_power[phys[l] - 1])
            .collect();
        Ok(NetView {
            gains,
            tx_power,
            noise_power,
            num_relays: config.num_relays,
            combining: config.combining,
        })
    }

    pub fn num_relays(&self) -> usize {
        self.num_relays
    }

    pub fn num_nodes(&self) -> usize {
        self.num_relays + 2
    }

    /// Number of state-bearing nodes (source plus relays).
    pub fn state_nodes(&self) -> usize {
        self.num_relays + 1
    }

    pub fn destination(&self) -> usize {
        self.num_relays + 1
    }

    pub fn gain(&self, from: usize, to: usize) -> f64 {
        self.gains[from][to]
    }

    pub fn tx_power(&self, node: usize) -> f64 {
        self.tx_power[node]
    }

    pub fn noise(&self, receiver: usize) -> f64 {
        self.noise_power[receiver - 1]
    }

    pub fn combining(&self) -> Combining {
        self.combining
    }
}

/// Per-message receive amplitudes for one joint state.
///
/// Under coherent combining each message occupies one row whose entries are
/// the summed co-sender amplitudes; under non-coherent combining each active
/// co-sender keeps its own row, so received powers add.
#[derive(Debug, Clone)]
pub struct MessageAmplitudeTable {
    state: StateVector,
    num_messages: usize,
    /// `(message index, amplitude per node)` rows.
    rows: Vec<(usize, Vec<f64>)>,
}

/// Builds the amplitude table of `messages` for one joint state.
pub fn amplitude_table(
    view: &NetView,
    state: StateVector,
    messages: &[MessageSpec],
) -> MessageAmplitudeTable {
    let nn = view.num_nodes();
    let mut rows = Vec::new();
    for (idx, msg) in messages.iter().enumerate() {
        match view.combining() {
            Combining::Coherent => {
                let mut amps = vec![0.0; nn];
                let mut active = false;
                for &(node, frac) in &msg.senders {
                    if state.transmits(node) && frac > 0.0 {
                        active = true;
                        let a = (frac * view.tx_power(node)).sqrt();
                        for to in 0..nn {
                            if to != node {
                                amps[to] += view.gain(node, to) * a;
                            }
                        }
                    }
                }
                if active {
                    rows.push((idx, amps));
                }
            }
            Combining::NonCoherent => {
                for &(node, frac) in &msg.senders {
                    if state.transmits(node) && frac > 0.0 {
                        let a = (frac * view.tx_power(node)).sqrt();
                        let mut amps = vec![0.0; nn];
                        for to in 0..nn {
                            if to != node {
                                amps[to] = view.gain(node, to) * a;
                            }
                        }
                        rows.push((idx, amps));
                    }
                }
            }
        }
    }
    MessageAmplitudeTable {
        state,
        num_messages: messages.len(),
        rows,
    }
}

impl MessageAmplitudeTable {
    pub fn state(&self) -> StateVector {
        self.state
    }

    pub fn num_messages(&self) -> usize {
        self.num_messages
    }

    /// Bitmask selecting every message of the table.
    pub fn all_messages(&self) -> u64 {
        if self.num_messages >= 64 {
            u64::MAX
        } else {
            (1u64 << self.num_messages) - 1
        }
    }

    /// Received power at `node` of the messages selected by `mask`.
    /// A transmitting receiver has no channel output and yields zero.
    pub fn power(&self, mask: u64, node: usize) -> f64 {
        if !self.state.listens(node) {
            return 0.0;
        }
        self.rows
            .iter()
            .filter(|(idx, _)| (mask >> idx) & 1 == 1)
            .map(|(_, amps)| amps[node] * amps[node])
            .sum()
    }

    /// Covariance of the channel outputs at `a` and `b` due to the selected
    /// messages. Zero if either receiver transmits.
    pub fn covariance(&self, mask: u64, a: usize, b: usize) -> f64 {
        if !self.state.listens(a) || !self.state.listens(b) {
            return 0.0;
        }
        self.rows
            .iter()
            .filter(|(idx, _)| (mask >> idx) & 1 == 1)
            .map(|(_, amps)| amps[a] * amps[b])
            .sum()
    }

    pub fn rows(&self) -> &[(usize, Vec<f64>)] {
        &self.rows
    }
}

/// Received power at `l` and `l2` and their output covariance for the message
/// set selected by `mask`.
pub fn second_order_stats(
    table: &MessageAmplitudeTable,
    mask: u64,
    l: usize,
    l2: usize,
) -> (f64, f64, f64) {
    (
        table.power(mask, l),
        table.power(mask, l2),
        table.covariance(mask, l, l2),
    )
}

/// Variance of the decoder's channel output after all messages in `known`
/// have been subtracted: the summed receive power of the remaining messages
/// plus the decoder's noise. `None` when the decoder transmits (it then has
/// no channel output and the state contributes no mutual information).
pub fn residual_variance(
    view: &NetView,
    table: &MessageAmplitudeTable,
    decoder: usize,
    known: u64,
) -> Option<f64> {
    if !table.state().listens(decoder) {
        return None;
    }
    let unknown = table.all_messages() & !known;
    Some(table.power(unknown, decoder) + view.noise(decoder))
}

/// Builds an equal-power line-network configuration from 1-D node positions
/// `0 = source`, `relays[..]`, `1 = destination`. Distances are clamped below
/// at `dist_floor` so degenerate geometries stay finite.
pub fn line_network(
    relay_positions: &[f64],
    theta: f64,
    snr_db: f64,
    combining: Combining,
    dist_floor: f64,
) -> NetworkConfig {
    let n = relay_positions.len();
    let mut pos = Vec::with_capacity(n + 2);
    pos.push(0.0);
    pos.extend_from_slice(relay_positions);
    pos.push(1.0);
    let nn = n + 2;
    let mut distance = vec![vec![0.0; nn]; nn];
    for a in 0..nn {
        for b in 0..nn {
            if a != b {
                distance[a][b] = (pos[a] - pos[b]).abs().max(dist_floor);
            }
        }
    }
    let p = 10f64.powf(snr_db / 10.0);
    NetworkConfig {
        num_relays: n,
        distance,
        path_loss_exponent: theta,
        tx_power: vec![p; n + 1],
        noise_power: vec![1.0; n + 1],
        combining,
        relay_order: (1..=n).collect(),
    }
}
