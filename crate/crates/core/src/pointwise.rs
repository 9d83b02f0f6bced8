//! Instantaneous and ergodic rates of the fading bottleneck channel.
//!
//! All rates are in nats per real channel use, i.e. carry the `1/2` of the
//! real Gaussian channel.

use thiserror::Error;

use crate::fading::{fpr_eq, CapacityDistribution, ChannelConfig, FadingDistribution};
use crate::numerics::{NumericsError, Tolerance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointwiseError {
    #[error("quantization noise variance is unbounded at zero capacity")]
    ZeroCapacity,
    #[error("fading gain must be non-negative, got {0}")]
    NegativeGain(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A channel configuration at one realized fading gain `s = |h|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPoint {
    pub cfg: ChannelConfig,
    pub s: f64,
}

impl ChannelPoint {
    pub fn new(cfg: ChannelConfig, s: f64) -> Result<Self, PointwiseError> {
        if !(s >= 0.0) {
            return Err(PointwiseError::NegativeGain(s));
        }
        Ok(Self { cfg, s })
    }

    pub fn snr(&self) -> f64 {
        self.cfg.power * self.s
    }
}

/// Relay output modelled as `Z = Y + M` with Gaussian quantization noise `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationModel {
    pub noise_variance: f64,
}

/// Rate of the compress-forward (oblivious) relay at one fading realization.
pub fn oblivious_capacity(pt: &ChannelPoint) -> f64 {
    let snr = pt.snr();
    0.5 * (snr.ln_1p() - (snr * pt.cfg.quantization_loss()).ln_1p())
}

/// Variance of the quantization noise that makes `I(Y; Z) = C`.
pub fn quantization_noise_variance(pt: &ChannelPoint) -> Result<QuantizationModel, PointwiseError> {
    if !(pt.cfg.capacity > 0.0) {
        return Err(PointwiseError::ZeroCapacity);
    }
    Ok(QuantizationModel { noise_variance: (pt.snr() + 1.0) / (2.0 * pt.cfg.capacity).exp_m1() })
}

/// Decode-forward rate: the weaker of the wireless hop and the bottleneck.
pub fn df_capacity(pt: &ChannelPoint) -> f64 {
    (0.5 * pt.snr().ln_1p()).min(pt.cfg.capacity)
}

/// `E_s[oblivious_capacity]`.
pub fn ergodic_oblivious(cfg: &ChannelConfig, fading: &dyn FadingDistribution) -> Result<f64, PointwiseError> {
    if cfg.capacity == 0.0 {
        return Ok(0.0);
    }
    let cfg = *cfg;
    let rate = move |s: f64| oblivious_capacity(&ChannelPoint { cfg, s });
    Ok(fading.expect_over(&rate, 0.0, f64::INFINITY, Tolerance::default())?)
}

/// `E_s[min(½ ln(1 + sP), C)]`, split at the gain where the minimum switches.
pub fn ergodic_df(cfg: &ChannelConfig, fading: &dyn FadingDistribution) -> Result<f64, PointwiseError> {
    let kink = (2.0 * cfg.capacity).exp_m1() / cfg.power;
    let power = cfg.power;
    let wireless = move |s: f64| 0.5 * (power * s).ln_1p();
    let below = fading.expect_over(&wireless, 0.0, kink, Tolerance::default())?;
    let above = if kink.is_finite() { cfg.capacity * fading.ccdf(kink) } else { 0.0 };
    Ok(below + above)
}

/// `Σ p_i · ergodic_oblivious(P, C_i)`.
pub fn ergodic_oblivious_uncertain(
    power: f64,
    caps: &CapacityDistribution,
    fading: &dyn FadingDistribution,
) -> Result<f64, PointwiseError> {
    let mut total = 0.0;
    for atom in caps.atoms() {
        let cfg = ChannelConfig { power, capacity: atom.capacity };
        total += atom.probability * ergodic_oblivious(&cfg, fading)?;
    }
    Ok(total)
}

/// Rate achieved through the equivalent gain, `½ ln(1 + P ν)`.
pub fn equivalent_gain_rate(pt: &ChannelPoint) -> f64 {
    0.5 * (pt.cfg.power * fpr_eq(pt.s, &pt.cfg)).ln_1p()
}
