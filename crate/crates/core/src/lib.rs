//! Achievable rates and capacity bounds for Gaussian half-duplex relay
//! networks.
//!
//! Every node either listens or transmits on a given resource, never both.
//! The crate computes, for a configurable line network:
//!
//! - layered (partial) decode-and-forward rates under fixed and random
//!   transmission schedules, coherent or non-coherent combining
//!   ([`df::df_rate`]),
//! - regular-encoding compress-and-forward rates with iteratively solved
//!   quantization noise ([`cf::cf_rate`], [`cf::solve_quantization_noise`]),
//! - a combined protocol with two alternately transmitting relays, one
//!   decoding and one compressing ([`combined::combined_rate`]),
//! - the half-duplex cut-set upper bound ([`cutset::cutset_bound`]),
//!
//! together with a deterministic derivative-free optimizer over schedules
//! and power allocations ([`optim::optimize_rate`]) and a sweep harness that
//! reproduces linear-network rate curves and writes CSV/SVG
//! ([`sweep::run_sweep`]).

pub mod cf;
pub mod combined;
pub mod cutset;
pub mod df;
pub mod entropy;
pub mod error;
pub mod model;
pub mod optim;
pub mod protocols;
pub mod sweep;

pub use cf::{cf_rate, solve_quantization_noise, CovMatrix, QuantizationParams};
pub use combined::{combined_rate, quantization_feasibility, CombinedParams};
pub use cutset::{cutset_bound, CorrelationSpec};
pub use df::{apply_reuse_constraint, df_rate, RateBreakdown};
pub use entropy::{gaussian_entropy, level_mutual_info, mixture_entropy, MixtureSpec};
pub use error::Error;
pub use model::{
    amplitude_table, build_gains, capacity, line_network, residual_variance, second_order_stats,
    Combining, KnowledgeMode, MessageAmplitudeTable, MessageId, MessageSpec, NetView,
    NetworkConfig, NodeState, PowerAllocation, StateDistribution, StateVector,
};
pub use optim::{optimize_rate, ConstraintGroup, OptimizeResult, SearchSpec};
pub use protocols::{optimize_point, PointResult, ProtocolKind};
pub use sweep::{
    emit_csv, emit_outputs, load_config, parse_config, parse_csv, run_sweep, SweepKind, SweepSpec,
    SweepTable,
};
