//! Shared fixtures for the rate-computation benchmarks.

use hdrelay_core::model::{
    line_network, Combining, KnowledgeMode, NetworkConfig, PowerAllocation, StateDistribution,
    SOURCE,
};

/// Two relays at `r` and `1 - r`, 10 dB, non-coherent.
pub fn two_relay_network(r: f64) -> NetworkConfig {
    line_network(&[r, 1.0 - r], 4.0, 10.0, Combining::NonCoherent, 1e-3)
}

/// A mid-weight two-relay schedule over the alternating states plus the
/// source-only state.
pub fn alternating_schedule(mode: KnowledgeMode) -> StateDistribution {
    let mut w = vec![0.0; 8];
    w[0b001] = 0.2;
    w[0b011] = 0.4;
    w[0b101] = 0.4;
    StateDistribution::from_weights(&w, mode).unwrap()
}

/// A plausible layered power allocation for two relays.
pub fn layered_allocation() -> PowerAllocation {
    let mut alloc = PowerAllocation::zeros(2);
    alloc.set_nu(SOURCE, SOURCE, 1, 0.5);
    alloc.set_nu(SOURCE, SOURCE, 2, 0.2);
    alloc.set_nu(SOURCE, SOURCE, 3, 0.1);
    alloc.set_nu(SOURCE, 1, 1, 0.1);
    alloc.set_nu(SOURCE, 2, 1, 0.1);
    alloc.set_nu(1, 1, 1, 0.6);
    alloc.set_nu(1, 2, 1, 0.2);
    alloc.set_nu(2, 2, 1, 0.5);
    alloc.set_nu(2, 2, 2, 0.5);
    alloc
}

/// Compress-and-forward allocation: full source power, strong broadcasts.
pub fn cf_allocation() -> PowerAllocation {
    let mut alloc = PowerAllocation::zeros(2);
    alloc.set_nu(SOURCE, SOURCE, 1, 1.0);
    alloc.omega[1] = 0.9;
    alloc.omega[2] = 0.9;
    alloc
}
