//! Half-duplex cut-set upper bound: for each source-side cut the
//! state-averaged MIMO rate from the cut's transmitters to the listening
//! receivers on the far side, minimized over cuts.
//!
//! Fixed schedules only; transmitter inputs are jointly Gaussian with
//! configurable pairwise correlations.

use crate::cf::log2_det_cholesky;
use crate::error::Error;
use crate::model::{NetView, NetworkConfig, StateDistribution, StateVector};

/// Pairwise input correlation coefficients between potential transmitters
/// (source and relays).
#[derive(Debug, Clone)]
pub struct CorrelationSpec {
    nodes: usize,
    rho: Vec<f64>,
}

impl CorrelationSpec {
    /// Independent inputs (all correlations zero).
    pub fn independent(num_relays: usize) -> Self {
        let nodes = num_relays + 1;
        CorrelationSpec {
            nodes,
            rho: vec![0.0; nodes * (nodes - 1) / 2],
        }
    }

    /// Number of free coefficients for the given network size.
    pub fn num_pairs(num_relays: usize) -> usize {
        let nodes = num_relays + 1;
        nodes * (nodes - 1) / 2
    }

    /// Builds from a flat coefficient list ordered by pair `(i, j)`, `i < j`.
    pub fn from_coefficients(num_relays: usize, rho: &[f64]) -> Result<Self, Error> {
        let nodes = num_relays + 1;
        if rho.len() != nodes * (nodes - 1) / 2 {
            return Err(Error::Domain(
                "wrong number of correlation coefficients".into(),
            ));
        }
        if rho.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Domain(
                "correlation coefficients must lie in [0,1]".into(),
            ));
        }
        Ok(CorrelationSpec {
            nodes,
            rho: rho.to_vec(),
        })
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.nodes);
        // Row-major upper triangle.
        i * self.nodes - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn rho(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else if i < j {
            self.rho[self.pair_index(i, j)]
        } else {
            self.rho[self.pair_index(j, i)]
        }
    }
}

/// Evaluates the cut-set bound for a fixed schedule and input correlations.
/// Returns the bound in bits per channel use and the bitmask of the binding
/// (source-side) cut.
pub fn cutset_bound(
    config: &NetworkConfig,
    dist: &StateDistribution,
    correlations: &CorrelationSpec,
) -> Result<(f64, u32), Error> {
    let view = NetView::new(config)?;
    let n = view.num_relays();
    if dist.num_nodes() != n + 1 {
        return Err(Error::Domain(
            "state distribution does not match the network size".into(),
        ));
    }
    if correlations.nodes != n + 1 {
        return Err(Error::Domain(
            "correlation spec does not match the network size".into(),
        ));
    }

    let mut best = f64::INFINITY;
    let mut best_cut = 1u32;
    // Source-side cuts: every relay subset, source always included.
    for relay_subset in 0..(1u32 << n) {
        let cut_mask = 1 | (relay_subset << 1);
        let mut value = 0.0;
        for (state, p) in dist.support() {
            value += p * state_cut_rate(&view, state, cut_mask, correlations)?;
        }
        if value < best {
            best = value;
            best_cut = cut_mask;
        }
    }
    Ok((best, best_cut))
}

/// `log2 det(I + N^-1 H S H^T)` for one state and one cut.
fn state_cut_rate(
    view: &NetView,
    state: StateVector,
    cut_mask: u32,
    correlations: &CorrelationSpec,
) -> Result<f64, Error> {
    let n = view.num_relays();
    let tx: Vec<usize> = (0..=n)
        .filter(|&l| (cut_mask >> l) & 1 == 1 && state.transmits(l))
        .collect();
    if tx.is_empty() {
        return Ok(0.0);
    }
    let mut rx: Vec<usize> = (1..=n)
        .filter(|&l| (cut_mask >> l) & 1 == 0 && state.listens(l))
        .collect();
    rx.push(view.destination());

    // Input covariance of the active transmitters.
    let t = tx.len();
    let mut sigma = vec![vec![0.0; t]; t];
    for a in 0..t {
        for b in 0..t {
            let pa = view.tx_power(tx[a]);
            let pb = view.tx_power(tx[b]);
            sigma[a][b] = correlations.rho(tx[a], tx[b]) * (pa * pb).sqrt();
        }
    }
    // Reject parameter combinations that are not a valid covariance.
    if t > 1 && log2_det_cholesky(&add_identity(&sigma, 1e-9)).is_err() {
        return Err(Error::Domain(
            "input correlation matrix is not positive semidefinite".into(),
        ));
    }

    // M = I + D H Sigma H^T D with D = diag(1/sqrt(noise)).
    let r = rx.len();
    let mut m = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in 0..r {
            let mut acc = 0.0;
            for a in 0..t {
                for b in 0..t {
                    acc += view.gain(tx[a], rx[i]) * sigma[a][b] * view.gain(tx[b], rx[j]);
                }
            }
            let d = (view.noise(rx[i]) * view.noise(rx[j])).sqrt();
            m[i][j] = acc / d + if i == j { 1.0 } else { 0.0 };
        }
    }
    log2_det_cholesky(&m)
}

fn add_identity(a: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    let mut out = a.to_vec();
    let scale = a
        .iter()
        .enumerate()
        .map(|(i, row)| row[i])
        .fold(0.0f64, f64::max)
        .max(1.0);
    for (i, row) in out.iter_mut().enumerate() {
        row[i] += eps * scale;
    }
    out
}

/// Readable label for a cut mask, e.g. `cut:s1` for `{source, relay 1}`.
pub fn cut_label(mask: u32, num_relays: usize) -> String {
    let mut s = String::from("cut:");
    if mask & 1 == 1 {
        s.push('s');
    }
    for l in 1..=num_relays {
        if (mask >> l) & 1 == 1 {
            s.push_str(&l.to_string());
        }
    }
    s
}
