//! Seeded Monte Carlo oracle for every analytic average rate.
//!
//! Draws are generated by ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with the
//! user seed. The sample index range is cut into fixed chunks of
//! [`CHUNK_SIZE`] draws and chunk `k` uses stream `k` of the generator, so the
//! result depends only on `(spec, seed)` and not on how many threads run.
//! Per-chunk means and variances are merged in chunk order.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::broadcast::BroadcastSolution;
use crate::fading::{fpr_eq, CapacityDistribution, ChannelConfig, FadingDistribution};
use crate::pointwise::{df_capacity, oblivious_capacity, ChannelPoint};
use crate::single_layer::SingleLayerSolution;

pub const CHUNK_SIZE: u64 = 1 << 16;

/// The nine rate schemes, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    ObliviousSingleLayer,
    ObliviousBroadcast,
    ObliviousErgodic,
    DfSingleLayer,
    DfBroadcast,
    DfErgodic,
    UncertainSingleLayer,
    UncertainBroadcast,
    UncertainErgodic,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::ObliviousSingleLayer,
        Scheme::ObliviousBroadcast,
        Scheme::ObliviousErgodic,
        Scheme::DfSingleLayer,
        Scheme::DfBroadcast,
        Scheme::DfErgodic,
        Scheme::UncertainSingleLayer,
        Scheme::UncertainBroadcast,
        Scheme::UncertainErgodic,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::ObliviousSingleLayer => "obliv-1l",
            Scheme::ObliviousBroadcast => "obliv-bs",
            Scheme::ObliviousErgodic => "obliv-erg",
            Scheme::DfSingleLayer => "df-1l",
            Scheme::DfBroadcast => "df-bs",
            Scheme::DfErgodic => "df-erg",
            Scheme::UncertainSingleLayer => "uc-obliv-1l",
            Scheme::UncertainBroadcast => "uc-obliv-bs",
            Scheme::UncertainErgodic => "uc-obliv-erg",
        }
    }

    pub fn is_uncertain(self) -> bool {
        matches!(self, Scheme::UncertainSingleLayer | Scheme::UncertainBroadcast | Scheme::UncertainErgodic)
    }

    pub fn is_single_layer(self) -> bool {
        matches!(self, Scheme::ObliviousSingleLayer | Scheme::DfSingleLayer | Scheme::UncertainSingleLayer)
    }

    pub fn is_broadcast(self) -> bool {
        matches!(self, Scheme::ObliviousBroadcast | Scheme::DfBroadcast | Scheme::UncertainBroadcast)
    }

    pub fn is_ergodic(self) -> bool {
        matches!(self, Scheme::ObliviousErgodic | Scheme::DfErgodic | Scheme::UncertainErgodic)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scheme tag {0:?}")]
pub struct UnknownScheme(pub String);

impl FromStr for Scheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL.into_iter().find(|sc| sc.tag() == s).ok_or_else(|| UnknownScheme(s.to_string()))
    }
}

/// Bottleneck capacity: known and fixed, or drawn per block from atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum CapacityModel {
    Fixed(f64),
    Random(CapacityDistribution),
}

impl CapacityModel {
    /// Capacity used by the fixed-capacity schemes: the mean for atoms.
    pub fn fixed_value(&self) -> f64 {
        match self {
            CapacityModel::Fixed(c) => *c,
            CapacityModel::Random(d) => d.c_avg(),
        }
    }

    /// Atoms used by the uncertain-capacity schemes; a fixed value is one
    /// atom of probability one.
    pub fn atoms(&self) -> CapacityDistribution {
        match self {
            CapacityModel::Fixed(c) => CapacityDistribution::single(*c).expect("validated capacity"),
            CapacityModel::Random(d) => d.clone(),
        }
    }
}

/// What the per-draw rule needs beyond the channel itself.
#[derive(Debug, Clone)]
pub enum Reference {
    Ergodic,
    SingleLayer(SingleLayerSolution),
    Broadcast(BroadcastSolution),
}

#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub scheme: Scheme,
    pub power: f64,
    pub capacity: CapacityModel,
    pub fading: Arc<dyn FadingDistribution>,
    pub n_samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationResult {
    pub mean: f64,
    /// Sample standard deviation over `√n`; zero when `n = 1`.
    pub std_error: f64,
    pub n_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("at least one sample is required")]
    NoSamples,
    #[error("scheme {scheme} cannot be simulated with a {given} reference")]
    SchemeMismatch { scheme: Scheme, given: &'static str },
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
}

/// One block: a fading gain and the bottleneck capacity in force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub s: f64,
    pub capacity: f64,
}

/// Draws one block. The capacity is drawn (from an independent uniform)
/// only for uncertain-capacity schemes.
pub fn sample_block<R: Rng + ?Sized>(rng: &mut R, fading: &dyn FadingDistribution, scheme: Scheme, capacity: &CapacityModel) -> Block {
    let s = fading.quantile(rng.random::<f64>());
    let capacity = if scheme.is_uncertain() {
        match capacity {
            CapacityModel::Fixed(c) => *c,
            CapacityModel::Random(d) => d.sample_with(rng.random::<f64>()),
        }
    } else {
        capacity.fixed_value()
    };
    Block { s, capacity }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        Moments { n, mean, m2 }
    }
}

fn check_reference(scheme: Scheme, reference: &Reference) -> Result<(), MonteCarloError> {
    let ok = match reference {
        Reference::Ergodic => scheme.is_ergodic(),
        // One layer is a degenerate layering: a fallback, or nothing to send.
        Reference::SingleLayer(_) => scheme.is_single_layer() || scheme.is_broadcast(),
        Reference::Broadcast(_) => scheme.is_broadcast(),
    };
    if ok {
        Ok(())
    } else {
        let given = match reference {
            Reference::Ergodic => "ergodic",
            Reference::SingleLayer(_) => "single-layer",
            Reference::Broadcast(_) => "broadcast",
        };
        Err(MonteCarloError::SchemeMismatch { scheme, given })
    }
}

/// Rate collected in one block.
pub fn block_rate(scheme: Scheme, power: f64, block: Block, reference: &Reference) -> f64 {
    let cfg = ChannelConfig { power, capacity: block.capacity };
    let point = ChannelPoint { cfg, s: block.s };
    match (scheme, reference) {
        (Scheme::ObliviousErgodic | Scheme::UncertainErgodic, _) => oblivious_capacity(&point),
        (Scheme::DfErgodic, _) => df_capacity(&point),
        (Scheme::UncertainSingleLayer | Scheme::UncertainBroadcast, Reference::SingleLayer(sol)) => {
            if fpr_eq(block.s, &cfg) > sol.threshold { sol.allocated_rate } else { 0.0 }
        }
        (_, Reference::SingleLayer(sol)) => {
            if block.s > sol.threshold { sol.allocated_rate } else { 0.0 }
        }
        (Scheme::DfBroadcast, Reference::Broadcast(sol)) => sol.rate_allocation(block.s),
        (_, Reference::Broadcast(sol)) => sol.rate_allocation(fpr_eq(block.s, &cfg)),
        (_, Reference::Ergodic) => unreachable!("checked by check_reference"),
    }
}

/// Average per-block rate over `n_samples` seeded draws.
pub fn simulate(spec: &SimulationSpec, reference: &Reference) -> Result<SimulationResult, MonteCarloError> {
    if spec.n_samples == 0 {
        return Err(MonteCarloError::NoSamples);
    }
    if !(spec.power > 0.0 && spec.power.is_finite()) {
        return Err(MonteCarloError::InvalidChannel(format!("power {}", spec.power)));
    }
    check_reference(spec.scheme, reference)?;
    let chunks = spec.n_samples.div_ceil(CHUNK_SIZE);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(k);
            let len = CHUNK_SIZE.min(spec.n_samples - k * CHUNK_SIZE);
            let mut m = Moments::default();
            for _ in 0..len {
                let block = sample_block(&mut rng, &*spec.fading, spec.scheme, &spec.capacity);
                m.push(block_rate(spec.scheme, spec.power, block, reference));
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let std_error = if total.n > 1 {
        (total.m2 / (total.n - 1) as f64 / total.n as f64).sqrt()
    } else {
        0.0
    };
    Ok(SimulationResult { mean: total.mean, std_error, n_samples: total.n })
}
