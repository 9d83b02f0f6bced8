//! Achievable rates of the block-fading Gaussian bottleneck channel.
//!
//! A transmitter reaches a destination through a relay whose wireless hop
//! fades from block to block and whose fronthaul link carries at most `C`
//! nats per channel use. The relay either compresses what it hears without
//! knowing the codebook (oblivious, compress-forward) or decodes and
//! re-encodes it (decode-forward). For each strategy the crate computes the
//! ergodic rate, the best single-layer (outage) rate and the rate of the
//! continuous broadcast approach, optionally with a random fronthaul capacity.
//!
//! All rates are in nats per real channel use.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod broadcast;
pub mod fading;
pub mod montecarlo;
pub mod numerics;
pub mod pointwise;
pub mod single_layer;

pub use broadcast::{
    solve_df_constrained, solve_df_layering, solve_unconstrained, BroadcastError, BroadcastSolution, DfLayering,
};
pub use fading::{
    equivalent_distribution, fpr_eq, fpr_eq_inverse, mixture_distribution, rayleigh, CapacityAtom,
    CapacityDistribution, ChannelConfig, EquivalentGainDistribution, FadingDistribution, FadingError,
    MixtureGainDistribution, PointMass, Rayleigh,
};
pub use montecarlo::{simulate, CapacityModel, Reference, Scheme, SimulationResult, SimulationSpec};
pub use numerics::{NumericsError, Tolerance};
pub use pointwise::{df_capacity, oblivious_capacity, ChannelPoint, PointwiseError};
pub use single_layer::{SingleLayerError, SingleLayerSolution};
