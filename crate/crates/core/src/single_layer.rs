//! Single-layer (outage) coding: the transmitter picks one rate, tuned to a
//! threshold gain, and the block is lost whenever the realized channel falls
//! below it.

use thiserror::Error;

use crate::fading::{fpr_eq, CapacityDistribution, ChannelConfig, FadingDistribution};
use crate::numerics::{find_root, maximize_scalar, NumericsError, Tolerance};

/// Tail mass below which the search for a threshold stops.
const TAIL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SingleLayerError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleLayerSolution {
    /// Threshold gain. A fading gain for the fixed-capacity schemes, an
    /// equivalent gain for the uncertain-capacity scheme.
    pub threshold: f64,
    pub allocated_rate: f64,
    pub average_rate: f64,
}

impl SingleLayerSolution {
    fn zero() -> Self {
        Self { threshold: 0.0, allocated_rate: 0.0, average_rate: 0.0 }
    }
}

/// Average oblivious rate when coding for fading threshold `s_th`.
pub fn oblivious_objective(s_th: f64, cfg: &ChannelConfig, fading: &dyn FadingDistribution) -> f64 {
    fading.ccdf(s_th) * oblivious_allocated_rate(s_th, cfg)
}

pub fn oblivious_allocated_rate(s_th: f64, cfg: &ChannelConfig) -> f64 {
    0.5 * (cfg.power * fpr_eq(s_th, cfg)).ln_1p()
}

/// Average decode-forward rate when coding for fading threshold `s_th`.
pub fn df_objective(s_th: f64, cfg: &ChannelConfig, fading: &dyn FadingDistribution) -> f64 {
    fading.ccdf(s_th) * df_allocated_rate(s_th, cfg)
}

pub fn df_allocated_rate(s_th: f64, cfg: &ChannelConfig) -> f64 {
    (0.5 * (cfg.power * s_th).ln_1p()).min(cfg.capacity)
}

/// Average rate with a random capacity when coding for equivalent-gain
/// threshold `nu_th`. An atom whose saturation limit does not exceed
/// `nu_th` can never decode and contributes nothing.
pub fn uncertain_objective(nu_th: f64, power: f64, caps: &CapacityDistribution, fading: &dyn FadingDistribution) -> f64 {
    uncertain_success_probability(nu_th, power, caps, fading) * 0.5 * (nu_th * power).ln_1p()
}

/// Probability that `fpr_eq(s, C_b) ≥ nu_th`.
pub fn uncertain_success_probability(nu_th: f64, power: f64, caps: &CapacityDistribution, fading: &dyn FadingDistribution) -> f64 {
    caps.atoms()
        .iter()
        .map(|atom| {
            let loss = (-2.0 * atom.capacity).exp();
            let denom = 1.0 - loss * (1.0 + power * nu_th);
            if denom <= 0.0 {
                0.0
            } else {
                atom.probability * fading.ccdf(nu_th / denom)
            }
        })
        .sum()
}

/// Slope of [`oblivious_objective`] in `s_th`.
fn oblivious_slope(s: f64, cfg: &ChannelConfig, fading: &dyn FadingDistribution) -> f64 {
    let a = -(-2.0 * cfg.capacity).exp_m1();
    let b = cfg.power * cfg.quantization_loss();
    let nu = fpr_eq(s, cfg);
    let dnu = a / ((1.0 + s * b) * (1.0 + s * b));
    -fading.pdf(s) * oblivious_allocated_rate(s, cfg) + fading.ccdf(s) * 0.5 * cfg.power * dnu / (1.0 + cfg.power * nu)
}

/// Slope of [`df_objective`] in `s_th` below the kink.
fn df_slope(s: f64, cfg: &ChannelConfig, fading: &dyn FadingDistribution) -> f64 {
    let p = cfg.power;
    -fading.pdf(s) * 0.5 * (p * s).ln_1p() + fading.ccdf(s) * 0.5 * p / (1.0 + p * s)
}

/// Slope of [`uncertain_objective`] in `nu_th`.
fn uncertain_slope(nu: f64, power: f64, caps: &CapacityDistribution, fading: &dyn FadingDistribution) -> f64 {
    let rate = 0.5 * (nu * power).ln_1p();
    let mut success = 0.0;
    let mut loss_rate = 0.0;
    for atom in caps.atoms() {
        let loss = (-2.0 * atom.capacity).exp();
        let denom = 1.0 - loss * (1.0 + power * nu);
        if denom <= 0.0 {
            continue;
        }
        let s = nu / denom;
        let ds = (1.0 - loss) / (denom * denom);
        success += atom.probability * fading.ccdf(s);
        loss_rate += atom.probability * fading.pdf(s) * ds;
    }
    -loss_rate * rate + success * 0.5 * power / (1.0 + power * nu)
}

/// Grid-and-Brent maximization, then the argument is polished by solving the
/// first-order condition: Brent alone only locates a smooth maximum to about
/// `√ε` relative.
fn search(objective: impl Fn(f64) -> f64, slope: impl Fn(f64) -> f64, upper: f64) -> Result<(f64, f64), SingleLayerError> {
    if !(upper > 0.0) {
        return Ok((0.0, 0.0));
    }
    let lo = upper * 1e-10;
    let best = maximize_scalar(&objective, lo, upper, Tolerance::default())?;
    let (a, b) = ((best.arg * (1.0 - 1e-4)).max(lo), (best.arg * (1.0 + 1e-4)).min(upper));
    if a < b && slope(a) > 0.0 && slope(b) < 0.0 {
        if let Ok(x) = find_root(&slope, a, b, Tolerance::tight()) {
            let value = objective(x);
            if value >= best.value * (1.0 - 1e-12) {
                return Ok((x, value));
            }
        }
    }
    Ok((best.arg, best.value))
}

/// Best single-layer rate of the compress-forward relay.
pub fn oblivious_single_layer(cfg: &ChannelConfig, fading: &dyn FadingDistribution) -> Result<SingleLayerSolution, SingleLayerError> {
    if cfg.capacity == 0.0 {
        return Ok(SingleLayerSolution::zero());
    }
    let upper = fading.tail_bound(TAIL_EPS);
    let (s_th, average) = search(|s| oblivious_objective(s, cfg, fading), |s| oblivious_slope(s, cfg, fading), upper)?;
    Ok(SingleLayerSolution { threshold: s_th, allocated_rate: oblivious_allocated_rate(s_th, cfg), average_rate: average })
}

/// Best single-layer rate of the decode-forward relay.
///
/// Past `s* = (e^{2C} - 1)/P` the allocated rate is clamped at `C` while the
/// success probability keeps falling, so the search stops at `s*`; among
/// equal maxima the smallest threshold is reported.
pub fn df_single_layer(cfg: &ChannelConfig, fading: &dyn FadingDistribution) -> Result<SingleLayerSolution, SingleLayerError> {
    let kink = (2.0 * cfg.capacity).exp_m1() / cfg.power;
    let upper = fading.tail_bound(TAIL_EPS).min(kink);
    let (s_th, average) = search(|s| df_objective(s, cfg, fading), |s| df_slope(s, cfg, fading), upper)?;
    Ok(SingleLayerSolution { threshold: s_th, allocated_rate: df_allocated_rate(s_th, cfg), average_rate: average })
}

/// Best single-layer rate of the compress-forward relay under a random
/// bottleneck capacity known to the relay only.
pub fn uncertain_single_layer(
    power: f64,
    caps: &CapacityDistribution,
    fading: &dyn FadingDistribution,
) -> Result<SingleLayerSolution, SingleLayerError> {
    let saturation = (2.0 * caps.c_max()).exp_m1() / power;
    let upper = fading.tail_bound(TAIL_EPS).min(saturation);
    let (nu_th, average) = search(|nu| uncertain_objective(nu, power, caps, fading), |nu| uncertain_slope(nu, power, caps, fading), upper)?;
    Ok(SingleLayerSolution {
        threshold: nu_th,
        allocated_rate: 0.5 * (nu_th * power).ln_1p(),
        average_rate: average,
    })
}
