//! Fading-gain laws and the equivalent-gain transforms introduced by the
//! compress-forward relay.
//!
//! A relay that quantizes its observation at rate `C` turns a fading gain `s`
//! into the equivalent gain
//!
//! ```text
//! ν = s (1 - e^{-2C}) / (1 + s P e^{-2C}),
//! ```
//!
//! which saturates at `(e^{2C} - 1) / P`. [`EquivalentGainDistribution`] is
//! the law of `ν` for a fixed capacity and [`MixtureGainDistribution`] the law
//! when the capacity itself is drawn from a [`CapacityDistribution`].

use std::fmt::Debug;
use std::sync::Arc;

use thiserror::Error;

use crate::numerics::{find_root, integrate_split, NumericsError, Tolerance};

/// Relative guard band below a saturation limit inside which pdfs are zero.
pub const SUPPORT_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FadingError {
    #[error("gain must be non-negative, got {0}")]
    NegativeGain(f64),
    #[error("equivalent gain {nu} is unreachable (saturation limit {limit})")]
    UnreachableGain { nu: f64, limit: f64 },
    #[error("transmit power must be positive and finite, got {0}")]
    InvalidPower(f64),
    #[error("bottleneck capacity must be non-negative, got {0}")]
    InvalidCapacity(f64),
    #[error("equivalent-gain law needs a positive capacity, got {0}")]
    ZeroCapacity(f64),
    #[error("invalid capacity distribution: {0}")]
    InvalidAtoms(String),
}

/// Law of a non-negative power gain.
///
/// `pdf`, `cdf` and `ccdf` are total functions: negative arguments carry no
/// mass. The `try_*` variants reject negative or NaN arguments instead.
pub trait FadingDistribution: Debug + Send + Sync {
    fn pdf(&self, u: f64) -> f64;

    fn cdf(&self, u: f64) -> f64;

    fn ccdf(&self, u: f64) -> f64 {
        1.0 - self.cdf(u)
    }

    fn ln_pdf(&self, u: f64) -> f64 {
        self.pdf(u).ln()
    }

    /// Derivative of the density. The default is a central difference;
    /// every distribution in this crate overrides it analytically.
    fn pdf_derivative(&self, u: f64) -> f64 {
        let h = 1e-6 * u.abs().max(1e-3);
        let lo = (u - h).max(0.0);
        (self.pdf(u + h) - self.pdf(lo)) / (u + h - lo)
    }

    /// Supremum of the support; `f64::INFINITY` when unbounded.
    fn support_upper(&self) -> f64 {
        f64::INFINITY
    }

    /// Interior points where the density is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Inverse CDF. The default inverts `cdf` by bracketed root finding.
    fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.cdf(hi) < p && hi < self.support_upper() && hi < 1e300 {
            hi *= 2.0;
        }
        let hi = hi.min(self.support_upper());
        find_root(|u| self.cdf(u) - p, 0.0, hi, Tolerance::tight()).unwrap_or(hi)
    }

    /// `E[f(X) · 1{lo ≤ X < hi}]`.
    fn expect_over(&self, f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: Tolerance) -> Result<f64, NumericsError> {
        let lo = lo.max(0.0);
        let hi = hi.min(self.support_upper());
        if !(hi > lo) {
            return Ok(0.0);
        }
        integrate_split(|u| f(u) * self.pdf(u), lo, hi, &self.breakpoints(), tol)
    }

    /// A point beyond which the tail mass is below `eps`.
    fn tail_bound(&self, eps: f64) -> f64 {
        let upper = self.support_upper();
        let mut u: f64 = 1.0;
        while self.ccdf(u) >= eps && u < upper && u < 1e300 {
            u *= 2.0;
        }
        u.min(upper)
    }

    fn try_pdf(&self, u: f64) -> Result<f64, FadingError> {
        check_gain(u).map(|u| self.pdf(u))
    }

    fn try_cdf(&self, u: f64) -> Result<f64, FadingError> {
        check_gain(u).map(|u| self.cdf(u))
    }

    fn try_ccdf(&self, u: f64) -> Result<f64, FadingError> {
        check_gain(u).map(|u| self.ccdf(u))
    }
}

fn check_gain(u: f64) -> Result<f64, FadingError> {
    if u >= 0.0 { Ok(u) } else { Err(FadingError::NegativeGain(u)) }
}

/// Unit-mean Rayleigh fading: the power gain is exponential, `F(u) = 1 - e^{-u}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Rayleigh;

pub fn rayleigh() -> Rayleigh {
    Rayleigh
}

impl FadingDistribution for Rayleigh {
    fn pdf(&self, u: f64) -> f64 {
        if u < 0.0 { 0.0 } else { (-u).exp() }
    }

    fn cdf(&self, u: f64) -> f64 {
        if u <= 0.0 { 0.0 } else { -(-u).exp_m1() }
    }

    fn ccdf(&self, u: f64) -> f64 {
        if u <= 0.0 { 1.0 } else { (-u).exp() }
    }

    fn ln_pdf(&self, u: f64) -> f64 {
        if u < 0.0 { f64::NEG_INFINITY } else { -u }
    }

    fn pdf_derivative(&self, u: f64) -> f64 {
        -self.pdf(u)
    }

    fn quantile(&self, p: f64) -> f64 {
        -(-p).ln_1p()
    }

    fn tail_bound(&self, eps: f64) -> f64 {
        -eps.ln()
    }
}

/// Non-fading channel: the gain is the constant `at` with probability one.
///
/// It has no density, so only CDF-based and expectation-based consumers
/// (ergodic rates, Monte Carlo) accept it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub at: f64,
}

impl FadingDistribution for PointMass {
    fn pdf(&self, _u: f64) -> f64 {
        0.0
    }

    fn cdf(&self, u: f64) -> f64 {
        if u >= self.at { 1.0 } else { 0.0 }
    }

    fn ccdf(&self, u: f64) -> f64 {
        if u >= self.at { 0.0 } else { 1.0 }
    }

    fn pdf_derivative(&self, _u: f64) -> f64 {
        0.0
    }

    fn support_upper(&self) -> f64 {
        self.at
    }

    fn quantile(&self, _p: f64) -> f64 {
        self.at
    }

    fn expect_over(&self, f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, _tol: Tolerance) -> Result<f64, NumericsError> {
        Ok(if lo <= self.at && self.at < hi { f(self.at) } else { 0.0 })
    }

    fn tail_bound(&self, _eps: f64) -> f64 {
        self.at
    }
}

/// Transmit power (linear) and bottleneck capacity (nats per real channel use).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub power: f64,
    pub capacity: f64,
}

impl ChannelConfig {
    pub fn new(power: f64, capacity: f64) -> Result<Self, FadingError> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(FadingError::InvalidPower(power));
        }
        if !(capacity >= 0.0) {
            return Err(FadingError::InvalidCapacity(capacity));
        }
        Ok(Self { power, capacity })
    }

    /// `e^{-2C}`, the fraction of the observation lost to quantization.
    pub fn quantization_loss(&self) -> f64 {
        (-2.0 * self.capacity).exp()
    }

    /// `(e^{2C} - 1) / P`, the supremum of the equivalent gain.
    pub fn gain_limit(&self) -> f64 {
        (2.0 * self.capacity).exp_m1() / self.power
    }

    fn map_coefficients(&self) -> (f64, f64) {
        (-(-2.0 * self.capacity).exp_m1(), self.power * self.quantization_loss())
    }
}

/// Equivalent fading power gain seen end to end through the quantizing relay.
pub fn fpr_eq(s: f64, cfg: &ChannelConfig) -> f64 {
    let (a, b) = cfg.map_coefficients();
    if s.is_infinite() {
        return cfg.gain_limit();
    }
    s * a / (1.0 + s * b)
}

/// Fading gain that produces the equivalent gain `nu`.
pub fn fpr_eq_inverse(nu: f64, cfg: &ChannelConfig) -> Result<f64, FadingError> {
    if !(nu >= 0.0) {
        return Err(FadingError::NegativeGain(nu));
    }
    let limit = cfg.gain_limit();
    if nu >= limit {
        return Err(FadingError::UnreachableGain { nu, limit });
    }
    let (a, b) = cfg.map_coefficients();
    Ok(nu / (a - b * nu))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityAtom {
    pub capacity: f64,
    pub probability: f64,
}

/// Discrete law of the bottleneck capacity, atoms sorted by capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityDistribution {
    atoms: Vec<CapacityAtom>,
    c_avg: f64,
}

impl CapacityDistribution {
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, FadingError> {
        let mut atoms: Vec<CapacityAtom> = atoms
            .into_iter()
            .map(|(capacity, probability)| CapacityAtom { capacity, probability })
            .collect();
        if atoms.is_empty() {
            return Err(FadingError::InvalidAtoms("no atoms".into()));
        }
        for atom in &atoms {
            if !(atom.capacity >= 0.0) || !atom.capacity.is_finite() {
                return Err(FadingError::InvalidAtoms(format!("capacity {} is not a finite non-negative value", atom.capacity)));
            }
            if !(atom.probability >= 0.0) || atom.probability > 1.0 {
                return Err(FadingError::InvalidAtoms(format!("probability {} outside [0, 1]", atom.probability)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.probability).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FadingError::InvalidAtoms(format!("probabilities sum to {total}, expected 1")));
        }
        atoms.sort_by(|x, y| x.capacity.total_cmp(&y.capacity));
        let c_avg = atoms.iter().map(|a| a.probability * a.capacity).sum();
        Ok(Self { atoms, c_avg })
    }

    /// A deterministic capacity.
    pub fn single(capacity: f64) -> Result<Self, FadingError> {
        Self::new([(capacity, 1.0)])
    }

    pub fn atoms(&self) -> &[CapacityAtom] {
        &self.atoms
    }

    pub fn c_avg(&self) -> f64 {
        self.c_avg
    }

    pub fn c_max(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.capacity)
    }

    /// Picks the atom whose cumulative probability first exceeds `uniform`.
    pub fn sample_with(&self, uniform: f64) -> f64 {
        let mut acc = 0.0;
        for atom in &self.atoms {
            acc += atom.probability;
            if uniform < acc {
                return atom.capacity;
            }
        }
        self.c_max()
    }
}

/// Law of `ν = fpr_eq(s, cfg)` for a fixed capacity.
#[derive(Debug, Clone)]
pub struct EquivalentGainDistribution {
    base: Arc<dyn FadingDistribution>,
    cfg: ChannelConfig,
    a: f64,
    b: f64,
    limit: f64,
}

pub fn equivalent_distribution(
    base: Arc<dyn FadingDistribution>,
    cfg: ChannelConfig,
) -> Result<EquivalentGainDistribution, FadingError> {
    EquivalentGainDistribution::new(base, cfg)
}

impl EquivalentGainDistribution {
    pub fn new(base: Arc<dyn FadingDistribution>, cfg: ChannelConfig) -> Result<Self, FadingError> {
        if !(cfg.capacity > 0.0) {
            return Err(FadingError::ZeroCapacity(cfg.capacity));
        }
        let (a, b) = cfg.map_coefficients();
        let base_upper = base.support_upper();
        let limit = if base_upper.is_finite() { fpr_eq(base_upper, &cfg) } else { cfg.gain_limit() };
        Ok(Self { base, cfg, a, b, limit })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn base(&self) -> &Arc<dyn FadingDistribution> {
        &self.base
    }

    /// Inverse map without range checks; callers stay below the limit.
    fn fading_gain(&self, u: f64) -> f64 {
        u / (self.a - self.b * u)
    }

    fn in_guard_band(&self, u: f64) -> bool {
        u >= self.limit * (1.0 - SUPPORT_GUARD)
    }
}

impl FadingDistribution for EquivalentGainDistribution {
    fn pdf(&self, u: f64) -> f64 {
        if u < 0.0 || self.in_guard_band(u) {
            return 0.0;
        }
        let d = self.a - self.b * u;
        self.base.pdf(self.fading_gain(u)) * self.a / (d * d)
    }

    fn cdf(&self, u: f64) -> f64 {
        if u < 0.0 {
            0.0
        } else if u >= self.limit {
            1.0
        } else {
            self.base.cdf(self.fading_gain(u))
        }
    }

    fn ccdf(&self, u: f64) -> f64 {
        if u < 0.0 {
            1.0
        } else if u >= self.limit {
            0.0
        } else {
            self.base.ccdf(self.fading_gain(u))
        }
    }

    fn ln_pdf(&self, u: f64) -> f64 {
        if u < 0.0 || self.in_guard_band(u) {
            return f64::NEG_INFINITY;
        }
        let d = self.a - self.b * u;
        self.base.ln_pdf(self.fading_gain(u)) + self.a.ln() - 2.0 * d.ln()
    }

    fn pdf_derivative(&self, u: f64) -> f64 {
        if u < 0.0 || self.in_guard_band(u) {
            return 0.0;
        }
        let d = self.a - self.b * u;
        let ds = self.a / (d * d);
        let d2s = 2.0 * self.a * self.b / (d * d * d);
        let s = self.fading_gain(u);
        self.base.pdf_derivative(s) * ds * ds + self.base.pdf(s) * d2s
    }

    fn support_upper(&self) -> f64 {
        self.limit
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints().into_iter().map(|s| fpr_eq(s, &self.cfg)).collect()
    }

    fn quantile(&self, p: f64) -> f64 {
        fpr_eq(self.base.quantile(p), &self.cfg)
    }

    fn tail_bound(&self, eps: f64) -> f64 {
        fpr_eq(self.base.tail_bound(eps), &self.cfg)
    }
}

#[derive(Debug, Clone)]
enum Component {
    /// A zero-capacity atom: the equivalent gain is identically zero.
    Silent,
    Active(EquivalentGainDistribution),
}

impl Component {
    fn cdf(&self, u: f64) -> f64 {
        match self {
            Component::Silent => if u >= 0.0 { 1.0 } else { 0.0 },
            Component::Active(d) => d.cdf(u),
        }
    }

    fn ccdf(&self, u: f64) -> f64 {
        match self {
            Component::Silent => if u >= 0.0 { 0.0 } else { 1.0 },
            Component::Active(d) => d.ccdf(u),
        }
    }

    fn pdf(&self, u: f64) -> f64 {
        match self {
            Component::Silent => 0.0,
            Component::Active(d) => d.pdf(u),
        }
    }

    fn pdf_derivative(&self, u: f64) -> f64 {
        match self {
            Component::Silent => 0.0,
            Component::Active(d) => d.pdf_derivative(u),
        }
    }

    fn support_upper(&self) -> f64 {
        match self {
            Component::Silent => 0.0,
            Component::Active(d) => d.support_upper(),
        }
    }
}

/// Law of the equivalent gain when the capacity is random:
/// `F_μ(u) = Σ p_i F_{ν_i}(u)`.
#[derive(Debug, Clone)]
pub struct MixtureGainDistribution {
    base: Arc<dyn FadingDistribution>,
    power: f64,
    caps: CapacityDistribution,
    components: Vec<(f64, Component)>,
}

pub fn mixture_distribution(
    base: Arc<dyn FadingDistribution>,
    power: f64,
    caps: CapacityDistribution,
) -> Result<MixtureGainDistribution, FadingError> {
    MixtureGainDistribution::new(base, power, caps)
}

impl MixtureGainDistribution {
    pub fn new(base: Arc<dyn FadingDistribution>, power: f64, caps: CapacityDistribution) -> Result<Self, FadingError> {
        let components = caps
            .atoms()
            .iter()
            .map(|atom| {
                let cfg = ChannelConfig::new(power, atom.capacity)?;
                let component = if atom.capacity > 0.0 {
                    Component::Active(EquivalentGainDistribution::new(base.clone(), cfg)?)
                } else {
                    Component::Silent
                };
                Ok((atom.probability, component))
            })
            .collect::<Result<Vec<_>, FadingError>>()?;
        Ok(Self { base, power, caps, components })
    }

    pub fn capacities(&self) -> &CapacityDistribution {
        &self.caps
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn base(&self) -> &Arc<dyn FadingDistribution> {
        &self.base
    }
}

impl FadingDistribution for MixtureGainDistribution {
    fn pdf(&self, u: f64) -> f64 {
        self.components.iter().map(|(p, c)| p * c.pdf(u)).sum()
    }

    fn cdf(&self, u: f64) -> f64 {
        self.components.iter().map(|(p, c)| p * c.cdf(u)).sum()
    }

    fn ccdf(&self, u: f64) -> f64 {
        self.components.iter().map(|(p, c)| p * c.ccdf(u)).sum()
    }

    fn pdf_derivative(&self, u: f64) -> f64 {
        self.components.iter().map(|(p, c)| p * c.pdf_derivative(u)).sum()
    }

    fn support_upper(&self) -> f64 {
        self.components.iter().map(|(_, c)| c.support_upper()).fold(0.0, f64::max)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut points = Vec::new();
        for (_, c) in &self.components {
            if let Component::Active(d) = c {
                points.push(d.support_upper());
                points.extend(d.breakpoints());
            }
        }
        points.retain(|x| x.is_finite() && *x > 0.0);
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }

    fn expect_over(&self, f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: Tolerance) -> Result<f64, NumericsError> {
        let mut total = 0.0;
        for (p, c) in &self.components {
            total += p * match c {
                Component::Silent => if lo <= 0.0 && 0.0 < hi { f(0.0) } else { 0.0 },
                Component::Active(d) => d.expect_over(f, lo, hi, tol)?,
            };
        }
        Ok(total)
    }

    fn tail_bound(&self, eps: f64) -> f64 {
        self.components
            .iter()
            .map(|(_, c)| match c {
                Component::Silent => 0.0,
                Component::Active(d) => d.tail_bound(eps),
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ray() -> Arc<dyn FadingDistribution> {
        Arc::new(Rayleigh)
    }

    #[test]
    fn rayleigh_values() {
        let r = rayleigh();
        assert_eq!(r.cdf(0.0), 0.0);
        assert_abs_diff_eq!(r.pdf(1.0), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.ccdf(2.0), 0.135_335_283_236_612_7, epsilon = 1e-15);
        assert!(matches!(r.try_cdf(-0.5), Err(FadingError::NegativeGain(_))));
        assert!(r.try_pdf(f64::NAN).is_err());
        assert_abs_diff_eq!(r.quantile(0.5), 2f64.ln(), epsilon = 1e-15);
        for u in [0.0, 0.1, 1.0, 7.5, 30.0] {
            assert!((r.ccdf(u) - (1.0 - r.cdf(u))).abs() <= 1e-15);
        }
    }

    #[test]
    fn rayleigh_pdf_integrates_to_one() {
        let total = integrate(|u| Rayleigh.pdf(u), 0.0, f64::INFINITY, Tolerance::default()).unwrap();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn fpr_eq_limits() {
        let zero_cap = ChannelConfig::new(3.0, 0.0).unwrap();
        assert_eq!(fpr_eq(5.0, &zero_cap), 0.0);
        let huge = ChannelConfig::new(1.0, 50.0).unwrap();
        assert_abs_diff_eq!(fpr_eq(1.0, &huge), 1.0, epsilon = 1e-15);
        let cfg = ChannelConfig::new(10.0, 2.0).unwrap();
        let limit = ((4.0f64).exp() - 1.0) / 10.0;
        assert_abs_diff_eq!(fpr_eq(1e15, &cfg), limit, epsilon = 1e-9);
        assert_abs_diff_eq!(fpr_eq(f64::INFINITY, &cfg), limit, epsilon = 1e-15);
    }

    #[test]
    fn fpr_eq_inverse_round_trip_and_boundary() {
        let cfg = ChannelConfig::new(10.0, 2.0).unwrap();
        assert_eq!(fpr_eq_inverse(0.0, &cfg).unwrap(), 0.0);
        for s in [0.1, 1.0, 10.0] {
            let back = fpr_eq_inverse(fpr_eq(s, &cfg), &cfg).unwrap();
            assert!((back - s).abs() <= 1e-12 * s);
        }
        assert!(matches!(fpr_eq_inverse(cfg.gain_limit(), &cfg), Err(FadingError::UnreachableGain { .. })));
        assert!(fpr_eq_inverse(-1.0, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig::new(0.0, 1.0).is_err());
        assert!(ChannelConfig::new(1.0, -1.0).is_err());
        assert!(ChannelConfig::new(1.0, f64::NAN).is_err());
        assert!(EquivalentGainDistribution::new(ray(), ChannelConfig::new(1.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn capacity_distribution_validation() {
        let caps = CapacityDistribution::new([(5.0, 2.0 / 3.0), (2.0, 1.0 / 3.0)]).unwrap();
        assert_eq!(caps.atoms()[0].capacity, 2.0);
        assert_abs_diff_eq!(caps.c_avg(), 4.0, epsilon = 1e-12);
        assert!(CapacityDistribution::new([(1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(CapacityDistribution::new([(1.0, -0.5), (2.0, 1.5)]).is_err());
        assert!(CapacityDistribution::new(Vec::<(f64, f64)>::new()).is_err());
        assert_eq!(caps.sample_with(0.2), 2.0);
        assert_eq!(caps.sample_with(0.5), 5.0);
    }

    #[test]
    fn equivalent_degenerates_to_base_for_huge_capacity() {
        let d = equivalent_distribution(ray(), ChannelConfig::new(10.0, 50.0).unwrap()).unwrap();
        for i in 0..=100 {
            let u = i as f64 * 0.1;
            assert!((d.cdf(u) - Rayleigh.cdf(u)).abs() <= 1e-9);
        }
    }

    #[test]
    fn equivalent_pdf_integrates_to_one() {
        let d = equivalent_distribution(ray(), ChannelConfig::new(10.0, 2.0).unwrap()).unwrap();
        let total = integrate(|u| d.pdf(u), 0.0, d.support_upper(), Tolerance::default()).unwrap();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn equivalent_saturates_at_limit() {
        let d = equivalent_distribution(ray(), ChannelConfig::new(1.0, 1.0).unwrap()).unwrap();
        let top = d.support_upper();
        assert!(d.cdf(top * (1.0 - 1e-9)) >= 1.0 - 1e-6);
        assert_eq!(d.cdf(top), 1.0);
        assert_eq!(d.pdf(top), 0.0);
        assert_eq!(d.pdf(top * 2.0), 0.0);
        assert_eq!(d.pdf(top * (1.0 - 1e-13)), 0.0);
    }

    #[test]
    fn equivalent_pdf_matches_cdf_slope() {
        for (p, c) in [(10.0, 2.0), (1.0, 1.0), (1000.0, 4.0), (3.0, 0.25)] {
            let d = equivalent_distribution(ray(), ChannelConfig::new(p, c).unwrap()).unwrap();
            let top = d.support_upper().min(30.0);
            for i in 1..200 {
                let u = top * i as f64 / 200.0;
                let h = 1e-6 * u;
                let fd = (d.cdf(u + h) - d.cdf(u - h)) / (2.0 * h);
                assert!((fd - d.pdf(u)).abs() <= 1e-5 * d.pdf(u).max(1.0), "P={p} C={c} u={u}");
                let fd2 = (d.pdf(u + h) - d.pdf(u - h)) / (2.0 * h);
                assert!((fd2 - d.pdf_derivative(u)).abs() <= 1e-4 * d.pdf_derivative(u).abs().max(1.0));
                if d.pdf(u) > 1e-300 {
                    assert_abs_diff_eq!(d.ln_pdf(u), d.pdf(u).ln(), epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn larger_capacity_dominates_stochastically() {
        let grid: Vec<f64> = (0..500).map(|i| i as f64 * 0.02).collect();
        for pair in [0.5, 1.0, 2.0, 4.0].windows(2) {
            let lo = equivalent_distribution(ray(), ChannelConfig::new(10.0, pair[0]).unwrap()).unwrap();
            let hi = equivalent_distribution(ray(), ChannelConfig::new(10.0, pair[1]).unwrap()).unwrap();
            for &u in &grid {
                assert!(hi.cdf(u) <= lo.cdf(u) + 1e-15);
            }
        }
    }

    #[test]
    fn single_atom_mixture_equals_equivalent() {
        let cfg = ChannelConfig::new(10.0, 2.0).unwrap();
        let eq = equivalent_distribution(ray(), cfg).unwrap();
        let mix = mixture_distribution(ray(), 10.0, CapacityDistribution::single(2.0).unwrap()).unwrap();
        for i in 0..1000 {
            let u = eq.support_upper() * 1.2 * i as f64 / 1000.0;
            assert!((mix.cdf(u) - eq.cdf(u)).abs() <= 1e-12);
            assert!((mix.pdf(u) - eq.pdf(u)).abs() <= 1e-12);
        }
    }

    #[test]
    fn two_atom_mixture_is_monotone_and_saturates() {
        let caps = CapacityDistribution::new([(2.0, 1.0 / 3.0), (5.0, 2.0 / 3.0)]).unwrap();
        let mix = mixture_distribution(ray(), 10.0, caps).unwrap();
        let top = ((10.0f64).exp() - 1.0) / 10.0;
        let n = 10_000;
        let mut prev = 0.0;
        for i in 0..=n {
            let u = 30.0 * i as f64 / n as f64;
            let v = mix.cdf(u);
            assert!(v >= prev);
            assert!(v - prev < 1e-2, "jump at {u}");
            prev = v;
        }
        assert_eq!(mix.cdf(top), 1.0);
        assert_eq!(mix.cdf(top * 3.0), 1.0);
        assert_abs_diff_eq!(mix.support_upper(), top, epsilon = 1e-9);
        // Component 1 saturates at (e^4 - 1)/10.
        let first = ((4.0f64).exp() - 1.0) / 10.0;
        assert_abs_diff_eq!(mix.breakpoints()[0], first, epsilon = 1e-12);
    }

    #[test]
    fn mixture_pdf_matches_cdf_slope() {
        let caps = CapacityDistribution::new([(2.0, 1.0 / 3.0), (5.0, 2.0 / 3.0)]).unwrap();
        for p in [1.0, 10.0, 1000.0] {
            let mix = mixture_distribution(ray(), p, caps.clone()).unwrap();
            let breaks = mix.breakpoints();
            for i in 1..400 {
                let u = 6.0 * i as f64 / 400.0;
                let h = 1e-6 * u;
                if breaks.iter().any(|b| (u - b).abs() < 1e3 * h) {
                    continue;
                }
                let fd = (mix.cdf(u + h) - mix.cdf(u - h)) / (2.0 * h);
                assert!((fd - mix.pdf(u)).abs() <= 1e-5 * mix.pdf(u).max(1.0), "P={p} u={u}");
            }
        }
    }

    #[test]
    fn zero_capacity_atom_is_a_point_mass_at_zero() {
        let caps = CapacityDistribution::new([(0.0, 0.25), (3.0, 0.75)]).unwrap();
        let mix = mixture_distribution(ray(), 5.0, caps).unwrap();
        assert_abs_diff_eq!(mix.cdf(0.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(mix.ccdf(1e-300), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn point_mass_expectation_is_exact() {
        let d = PointMass { at: 1.0 };
        let v = d.expect_over(&|s| s * 3.0, 0.0, f64::INFINITY, Tolerance::default()).unwrap();
        assert_eq!(v, 3.0);
        assert_eq!(d.expect_over(&|s| s, 0.0, 1.0, Tolerance::default()).unwrap(), 0.0);
        assert_eq!(d.quantile(0.3), 1.0);
    }

    proptest! {
        #[test]
        fn fpr_eq_increasing_in_gain_and_capacity(
            s in 0.0f64..50.0, ds in 1e-6f64..5.0, p in 0.1f64..1000.0, c in 0.05f64..8.0, dc in 1e-3f64..2.0
        ) {
            let cfg = ChannelConfig::new(p, c).unwrap();
            prop_assert!(fpr_eq(s + ds, &cfg) > fpr_eq(s, &cfg));
            let bigger = ChannelConfig::new(p, c + dc).unwrap();
            if s > 0.0 {
                prop_assert!(fpr_eq(s, &bigger) > fpr_eq(s, &cfg));
            }
            prop_assert!(fpr_eq(s, &cfg) < cfg.gain_limit());
        }

        #[test]
        fn inverse_round_trips(s in 0.0f64..100.0, p in 0.1f64..1000.0, c in 0.05f64..6.0) {
            let cfg = ChannelConfig::new(p, c).unwrap();
            let nu = fpr_eq(s, &cfg);
            let back = fpr_eq_inverse(nu, &cfg).unwrap();
            prop_assert!((fpr_eq(back, &cfg) - nu).abs() <= 1e-12 * nu.max(1e-300));
        }
    }
}
