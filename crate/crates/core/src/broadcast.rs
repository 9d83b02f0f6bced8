//! Continuous broadcast-approach layering.
//!
//! The transmitter superimposes a continuum of layers indexed by channel gain;
//! a receiver at gain `s` decodes every layer up to `s`. The layering is
//! described by the residual power `I(u)` (power of the layers above `u`) and
//! its density `ρ(u) = -I'(u)`. The rate decoded at gain `s` is
//!
//! ```text
//! R(s) = ½ ∫_0^s ρ(u) u / (1 + I(u) u) du
//! ```
//!
//! and the average rate is `∫ (1 - G(u)) dR(u)` for the gain law `G`.
//!
//! Pointwise maximization gives `I*(u) = (1 - G(u) - λ - u g(u)) / (u² g(u))`
//! between the boundaries `I*(u0) = P` and `I*(u1) = 0`, where `λ ≥ 0` prices
//! a cap on the total rate. Along `I*` the decoded rate telescopes to
//! `R(s) = ½ ln(s² g(s) / (u0² g(u0)))` independently of `λ`.
//!
//! When `I*` is not monotone (a mixture of saturating equivalent gains at
//! high SNR is the typical case) it is not a valid layering. The solver then
//! irons it: the residual power is held flat over the offending range at the
//! level where the pointwise first-order condition integrates to zero, and
//! follows `I*` elsewhere.

use std::sync::Arc;

use thiserror::Error;

use crate::fading::{ChannelConfig, FadingDistribution};
use crate::numerics::{find_root, integrate_split, search_grid, NumericsError, Tolerance};
use crate::single_layer::{df_single_layer, SingleLayerError, SingleLayerSolution};

const SCAN_POINTS: usize = 2000;
const IRON_POINTS: usize = 4000;
const VALIDATION_POINTS: usize = 1000;
/// Tail mass below which the gain law is treated as exhausted.
const NEGLIGIBLE_TAIL: f64 = 1e-12;
const DOWNWARD_STEP: f64 = 0.97;
const RATE_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BroadcastError {
    #[error("transmit power must be positive and finite, got {0}")]
    InvalidPower(f64),
    #[error("no sign change for the {which:?} boundary equation: {detail}")]
    NoBoundary { which: Boundary, detail: String },
    #[error("residual power increases at u = {at} (power density {density}); the gain law is outside the solver's validity class")]
    NonMonotone { at: f64, density: f64 },
    #[error("ironing failed: {0}")]
    Ironing(String),
    #[error("rate-constrained layering needs a gain law with monotone optimal residual power")]
    IrregularConstrained,
    #[error("rate-constrained layering has no bracket (unconstrained total rate {unconstrained_total}, capacity {capacity})")]
    NoConstrainedBracket { unconstrained_total: f64, capacity: f64 },
    #[error("rate-constrained layering missed the capacity: total rate {total_rate}, capacity {capacity}, multiplier {lambda}")]
    ConstraintMismatch { total_rate: f64, capacity: f64, lambda: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    SingleLayer(#[from] SingleLayerError),
}

/// Pointwise-optimal layering quantities for a gain law and multiplier.
#[derive(Clone, Copy)]
struct Kernel<'a> {
    dist: &'a dyn FadingDistribution,
    lambda: f64,
}

impl Kernel<'_> {
    /// `1 - G(u) - λ - u g(u)`; `I*` has its sign.
    fn numerator(&self, u: f64) -> f64 {
        self.dist.ccdf(u) - self.lambda - u * self.dist.pdf(u)
    }

    /// Sign of `I*(u) - P`, without dividing by the density.
    fn excess(&self, u: f64, power: f64) -> f64 {
        self.numerator(u) - power * u * u * self.dist.pdf(u)
    }

    fn power(&self, u: f64) -> f64 {
        let g = self.dist.pdf(u);
        let n = self.numerator(u);
        if g > 0.0 {
            n / (u * u * g)
        } else if n > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }

    /// `ρ*(u) = -d I*/du`.
    fn density(&self, u: f64) -> f64 {
        let g = self.dist.pdf(u);
        let dg = self.dist.pdf_derivative(u);
        let n = self.numerator(u);
        let dn = -2.0 * g - u * dg;
        let d = u * u * g;
        let dd = 2.0 * u * g + u * u * dg;
        -(dn * d - n * dd) / (d * d)
    }

    /// `dR/du` along `I*`.
    fn rate_density(&self, u: f64) -> f64 {
        0.5 * self.density(u) * u / (1.0 + self.power(u) * u)
    }

    /// `ln u + ½ ln g(u)`; rate increments along `I*` are its differences.
    fn log_weight(&self, u: f64) -> f64 {
        u.ln() + 0.5 * self.dist.ln_pdf(u)
    }

    /// Derivative in `I` of the pointwise objective at level `c`.
    fn level_slope(&self, u: f64, c: f64) -> f64 {
        let t = 1.0 + u * c;
        0.5 * (self.dist.ccdf(u) - self.lambda - self.dist.pdf(u) * u * t) / (t * t)
    }
}

/// Piece of `[u0, u1]` on which the residual power follows `I*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    /// Decoded rate at `start`.
    pub rate_at_start: f64,
}

/// Optimal continuous layering for one gain law and power budget.
#[derive(Debug, Clone)]
pub struct BroadcastSolution {
    dist: Arc<dyn FadingDistribution>,
    power: f64,
    lambda: f64,
    segments: Vec<Segment>,
    /// Residual power held between consecutive segments.
    flat_levels: Vec<f64>,
    total_rate: f64,
    average_rate: f64,
}

impl BroadcastSolution {
    fn kernel(&self) -> Kernel<'_> {
        Kernel { dist: &*self.dist, lambda: self.lambda }
    }

    pub fn distribution(&self) -> &Arc<dyn FadingDistribution> {
        &self.dist
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn u0(&self) -> f64 {
        self.segments[0].start
    }

    pub fn u1(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    /// Lagrange multiplier of the total-rate cap; zero when the cap is slack.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn average_rate(&self) -> f64 {
        self.average_rate
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn flat_levels(&self) -> &[f64] {
        &self.flat_levels
    }

    /// Whether the layering had to be flattened somewhere inside `[u0, u1]`.
    pub fn is_ironed(&self) -> bool {
        self.segments.len() > 1
    }

    /// Index of the segment containing `u`, or `Err(i)` when `u` lies in the
    /// flat stretch following segment `i`.
    fn locate(&self, u: f64) -> Result<usize, usize> {
        for (i, seg) in self.segments.iter().enumerate() {
            if u <= seg.end {
                return if u >= seg.start { Ok(i) } else { Err(i - 1) };
            }
        }
        Err(self.segments.len() - 1)
    }

    /// Residual power `I(u)`: `P` below `u0`, zero above `u1`.
    pub fn residual_power(&self, u: f64) -> f64 {
        if u < self.u0() {
            return self.power;
        }
        if u > self.u1() {
            return 0.0;
        }
        match self.locate(u) {
            Ok(_) => self.kernel().power(u),
            Err(i) => self.flat_levels[i],
        }
    }

    /// Layer power density `ρ(u) = -I'(u)`.
    pub fn power_density(&self, u: f64) -> f64 {
        if u < self.u0() || u > self.u1() {
            return 0.0;
        }
        match self.locate(u) {
            Ok(_) => self.kernel().density(u),
            Err(_) => 0.0,
        }
    }

    /// Rate decoded by a receiver whose gain is `s`.
    pub fn rate_allocation(&self, s: f64) -> f64 {
        if s < self.u0() {
            return 0.0;
        }
        if s >= self.u1() {
            return self.total_rate;
        }
        let k = self.kernel();
        match self.locate(s) {
            Ok(i) => {
                let seg = self.segments[i];
                seg.rate_at_start + k.log_weight(s) - k.log_weight(seg.start)
            }
            Err(i) => self.segments[i + 1].rate_at_start,
        }
    }

    /// `∫ (1 - G(u)) dR(u)` for an arbitrary gain law `G`.
    pub fn average_rate_under(&self, gains: &dyn FadingDistribution) -> Result<f64, BroadcastError> {
        let k = self.kernel();
        let mut breaks = self.dist.breakpoints();
        breaks.extend(gains.breakpoints());
        let mut total = 0.0;
        for seg in &self.segments {
            total += integrate_split(|u| gains.ccdf(u) * k.rate_density(u), seg.start, seg.end, &breaks, Tolerance::default())?;
        }
        Ok(total)
    }

    /// `∫ R(s) g(s) ds + R(u1)(1 - G(u1))`, the by-parts form of the average
    /// rate under the solution's own gain law.
    pub fn average_rate_by_parts(&self) -> Result<f64, BroadcastError> {
        let breaks = self.dist.breakpoints();
        let mut total = self.total_rate * self.dist.ccdf(self.u1());
        for (i, seg) in self.segments.iter().enumerate() {
            total += integrate_split(|s| self.rate_allocation(s) * self.dist.pdf(s), seg.start, seg.end, &breaks, Tolerance::default())?;
            if let Some(next) = self.segments.get(i + 1) {
                let level = next.rate_at_start;
                total += level * (self.dist.ccdf(seg.end) - self.dist.ccdf(next.start));
            }
        }
        Ok(total)
    }

    /// Total rate by quadrature of `½ ρ u / (1 + I u)`, independent of the
    /// telescoped closed form.
    pub fn total_rate_by_quadrature(&self) -> Result<f64, BroadcastError> {
        let k = self.kernel();
        let breaks = self.dist.breakpoints();
        let mut total = 0.0;
        for seg in &self.segments {
            total += integrate_split(|u| k.rate_density(u), seg.start, seg.end, &breaks, Tolerance::default())?;
        }
        Ok(total)
    }

    /// `(I*(u0) - P, I*(u1))` evaluated from the unclamped formula.
    pub fn boundary_residuals(&self) -> (f64, f64) {
        let k = self.kernel();
        (k.power(self.u0()) - self.power, k.power(self.u1()))
    }
}

pub fn residual_power(sol: &BroadcastSolution, u: f64) -> f64 {
    sol.residual_power(u)
}

pub fn rate_allocation(sol: &BroadcastSolution, s: f64) -> f64 {
    sol.rate_allocation(s)
}

pub fn average_rate(sol: &BroadcastSolution, gains: &dyn FadingDistribution) -> Result<f64, BroadcastError> {
    sol.average_rate_under(gains)
}

/// Boundaries and formula segments before rates are attached.
struct Layout {
    segments: Vec<(f64, f64)>,
    flat_levels: Vec<f64>,
}

fn check_power(power: f64) -> Result<(), BroadcastError> {
    if power > 0.0 && power.is_finite() { Ok(()) } else { Err(BroadcastError::InvalidPower(power)) }
}

/// Scan interval `[lo, hi]` with `I*(lo) > P` and `hi` past the tail.
fn scan_range(k: &Kernel, power: f64) -> Result<(f64, f64), BroadcastError> {
    let upper = k.dist.support_upper();
    let hi = k.dist.tail_bound(1e-15).min(upper * (1.0 - 1e-9));
    if !(hi > 0.0) {
        return Err(BroadcastError::NoBoundary { which: Boundary::Upper, detail: "gain law has no positive support".into() });
    }
    let mut lo = hi * 1e-6;
    for _ in 0..300 {
        if k.excess(lo, power) > 0.0 {
            return Ok((lo, hi));
        }
        lo *= 0.1;
    }
    Err(BroadcastError::NoBoundary { which: Boundary::Lower, detail: format!("I(u) stays below P = {power} near zero") })
}

/// Largest root of `I* = P` below `below`, found by stepping down
/// geometrically.
fn lower_boundary(k: &Kernel, power: f64, below: f64) -> Result<f64, BroadcastError> {
    let mut hi = below;
    let mut lo = below * DOWNWARD_STEP;
    for _ in 0..30_000 {
        if k.excess(lo, power) >= 0.0 {
            return Ok(find_root(|u| k.excess(u, power), lo, hi, Tolerance::tight())?);
        }
        hi = lo;
        lo *= DOWNWARD_STEP;
        if lo == 0.0 {
            break;
        }
    }
    Err(BroadcastError::NoBoundary { which: Boundary::Lower, detail: format!("I(u) never reaches P = {power} below u = {below}") })
}

/// Smallest root of `I* = 0` above `above`.
fn upper_boundary(k: &Kernel, above: f64, hi: f64) -> Result<f64, BroadcastError> {
    let grid = search_grid(above, hi, SCAN_POINTS);
    match crate::numerics::first_sign_change(|u| k.numerator(u), grid) {
        Some((a, b)) => Ok(find_root(|u| k.numerator(u), a, b, Tolerance::tight())?),
        None => Err(BroadcastError::NoBoundary { which: Boundary::Upper, detail: format!("I(u) stays positive on [{above}, {hi}]") }),
    }
}

fn regular_layout(k: &Kernel, power: f64, lo: f64, hi: f64) -> Result<Layout, BroadcastError> {
    let u1 = upper_boundary(k, lo, hi)?;
    let u0 = lower_boundary(k, power, u1)?;
    Ok(Layout { segments: vec![(u0, u1)], flat_levels: Vec::new() })
}

/// Whether `I*` turns positive again after its first zero while the gain law
/// still carries mass.
fn reemerges(k: &Kernel, lo: f64, hi: f64) -> bool {
    let grid = search_grid(lo, hi, SCAN_POINTS);
    let Some(first_zero) = grid.iter().position(|&u| k.numerator(u) <= 0.0) else {
        return false;
    };
    grid[first_zero..].iter().any(|&u| k.dist.ccdf(u) > NEGLIGIBLE_TAIL && k.numerator(u) > 0.0)
}

#[derive(Debug, Clone, Copy)]
struct Block {
    start: usize,
    end: usize,
    level: f64,
}

/// Pool-adjacent-violators on a grid, then continuous refinement of every
/// pooled level.
fn ironed_layout(k: &Kernel, power: f64, lo: f64, hi: f64) -> Result<Layout, BroadcastError> {
    let x = search_grid(lo, hi, IRON_POINTS);
    let n = x.len();
    let width: Vec<f64> = (0..n)
        .map(|i| {
            let left = if i == 0 { x[0] } else { (x[i - 1] * x[i]).sqrt() };
            let right = if i + 1 == n { x[n - 1] } else { (x[i] * x[i + 1]).sqrt() };
            right - left
        })
        .collect();
    let pointwise: Vec<f64> = x.iter().map(|&u| k.power(u).clamp(0.0, power)).collect();

    let block_level = |start: usize, end: usize| -> f64 {
        if start == end {
            return pointwise[start];
        }
        let slope = |c: f64| (start..=end).map(|i| width[i] * k.level_slope(x[i], c)).sum::<f64>();
        if slope(0.0) <= 0.0 {
            return 0.0;
        }
        if slope(power) >= 0.0 {
            return power;
        }
        find_root(slope, 0.0, power, Tolerance::default().with_max_iter(200)).unwrap_or(0.5 * power)
    };

    let mut stack: Vec<Block> = Vec::with_capacity(n);
    for (i, &level) in pointwise.iter().enumerate() {
        stack.push(Block { start: i, end: i, level });
        while stack.len() >= 2 && stack[stack.len() - 2].level < stack[stack.len() - 1].level {
            let last = stack.pop().unwrap();
            let prev = stack.pop().unwrap();
            let level = block_level(prev.start, last.end);
            stack.push(Block { start: prev.start, end: last.end, level });
        }
    }

    if stack[0].level < power {
        return Err(BroadcastError::NoBoundary { which: Boundary::Lower, detail: "ironed layering starts below P".into() });
    }
    if !stack.iter().any(|b| b.level <= 0.0) {
        return Err(BroadcastError::NoBoundary { which: Boundary::Upper, detail: "ironed layering never reaches zero".into() });
    }

    // End points of a flat stretch move with its level, so they are searched
    // for across the neighbouring blocks as well.
    // End points of a flat stretch move with its level, so they are searched
    // for up to the neighbouring pooled blocks.
    let pooled = |b: &Block| b.end > b.start || b.level <= 0.0;
    let is_flat = |b: &Block| b.end > b.start && b.level > 0.0 && b.level < power;
    let mut refined = Vec::new();
    let mut saturated_to = None;
    let mut stop_at = None;
    let mut left_anchor = x[0];
    for (i, block) in stack.iter().enumerate() {
        if !is_flat(block) {
            if pooled(block) {
                left_anchor = x[block.end];
            }
            continue;
        }
        let right_anchor = stack[i + 1..].iter().find(|b| pooled(b)).map_or(x[n - 1], |b| x[b.start]);
        let lost = |at: f64| BroadcastError::Ironing(format!("pooled block near level {} has no end point at {at}", block.level));
        match refine_flat(k, power, block.level, left_anchor, right_anchor)? {
            Flat::Level(a, b, c) => refined.push((a, b, c)),
            Flat::Zero(z) if z.is_finite() => {
                stop_at = Some(z);
                break;
            }
            Flat::Saturated(b) if b.is_finite() && refined.is_empty() => saturated_to = Some(b),
            Flat::Zero(_) => return Err(lost(0.0)),
            Flat::Saturated(_) => return Err(lost(power)),
        }
        left_anchor = x[block.end];
    }

    let u0 = match (saturated_to, refined.first()) {
        (Some(b), _) => b,
        (None, Some(f)) => lower_boundary(k, power, f.0)?,
        (None, None) => {
            let z = match stop_at {
                Some(z) => z,
                None => {
                    let first_zero = stack.iter().find(|b| b.level <= 0.0).map(|b| x[b.start]).unwrap();
                    upper_boundary(k, lo, first_zero.max(lo * 1.01).min(hi))?
                }
            };
            lower_boundary(k, power, z)?
        }
    };
    let last_flat_end = refined.last().map_or(u0, |f| f.1);
    let u1 = match stop_at {
        Some(z) => z,
        None => upper_boundary(k, last_flat_end, hi)?,
    };

    let mut segments = Vec::with_capacity(refined.len() + 1);
    let mut flat_levels = Vec::with_capacity(refined.len());
    let mut cursor = u0;
    for &(a, b, level) in &refined {
        if !(a >= cursor && b > a) {
            return Err(BroadcastError::Ironing(format!("flat stretch [{a}, {b}] overlaps the layering before {cursor}")));
        }
        segments.push((cursor, a));
        flat_levels.push(level);
        cursor = b;
    }
    if !(u1 >= cursor) {
        return Err(BroadcastError::Ironing(format!("upper boundary {u1} precedes the last flat stretch ending at {cursor}")));
    }
    segments.push((cursor, u1));
    Ok(Layout { segments, flat_levels })
}

/// Outcome of refining one pooled block.
enum Flat {
    /// Level `c` on `[a, b]`.
    Level(f64, f64, f64),
    /// The condition stays negative down to zero power: the layering stops
    /// where `I*` first reaches zero, at the returned point.
    Zero(f64),
    /// The condition stays positive up to `P`: full power runs to the
    /// returned point.
    Saturated(f64),
}

/// Continuous flat level `c` on `[a(c), b(c)]`, where `I*(a) = I*(b) = c`
/// and the first-order condition `∫_a^b ∂φ/∂I(u, c) du = 0` holds.
fn refine_flat(k: &Kernel, power: f64, guess: f64, left: f64, right: f64) -> Result<Flat, BroadcastError> {
    let sub = search_grid(left, right, 2000);
    let ends = |c: f64| -> Option<(f64, f64)> {
        let ia = sub.iter().position(|&u| k.power(u) <= c)?;
        let ib = sub.iter().rposition(|&u| k.power(u) >= c)?;
        if ia == 0 || ib + 1 >= sub.len() || ib < ia {
            return None;
        }
        let f = |u: f64| k.power(u) - c;
        let a = find_root(f, sub[ia - 1], sub[ia], Tolerance::tight()).ok()?;
        let b = find_root(f, sub[ib], sub[ib + 1], Tolerance::tight()).ok()?;
        Some((a, b))
    };
    let breaks = k.dist.breakpoints();
    let condition = |c: f64| -> f64 {
        match ends(c) {
            Some((a, b)) => integrate_split(|u| k.level_slope(u, c), a, b, &breaks, Tolerance::default()).unwrap_or(f64::NAN),
            None => f64::NAN,
        }
    };
    if condition(0.0) <= 0.0 {
        return Ok(Flat::Zero(ends(0.0).map(|e| e.0).unwrap_or(f64::NAN)));
    }
    if condition(power) >= 0.0 {
        return Ok(Flat::Saturated(ends(power).map(|e| e.1).unwrap_or(f64::NAN)));
    }
    // Levels only admit end points in a window around the grid guess, which
    // can be narrow when the bump is shallow: steps shrink when they leave it.
    let expand = |sign: f64, want: fn(f64) -> bool| -> Option<(f64, f64)> {
        let mut at = guess;
        let mut f_at = condition(at);
        let mut step = 1e-3 * guess;
        for _ in 0..200 {
            if want(f_at) {
                return Some((at, f_at));
            }
            let next = (at + sign * step).clamp(0.0, power);
            let f_next = condition(next);
            if f_next.is_nan() || next == at {
                step *= 0.25;
                if step < 1e-14 * guess {
                    return None;
                }
                continue;
            }
            (at, f_at) = (next, f_next);
            step *= 2.0;
        }
        None
    };
    let bracket = expand(-1.0, |f| f > 0.0).zip(expand(1.0, |f| f < 0.0));
    let Some(((lo, _), (hi, _))) = bracket else {
        return Err(BroadcastError::Ironing(format!("no bracket for the flat level near {guess}")));
    };
    let level = find_root(|c| {
        let v = condition(c);
        if v.is_nan() { 0.0 } else { v }
    }, lo, hi, Tolerance::new(1e-13, 0.0, 200)?)?;
    let (a, b) = ends(level).ok_or_else(|| BroadcastError::Ironing(format!("flat level {level} lost its end points")))?;
    Ok(Flat::Level(a, b, level))
}

fn assemble(dist: Arc<dyn FadingDistribution>, power: f64, lambda: f64, layout: Layout) -> Result<BroadcastSolution, BroadcastError> {
    let k = Kernel { dist: &*dist, lambda };
    validate_monotone(&k, power, &layout.segments)?;
    let mut segments = Vec::with_capacity(layout.segments.len());
    let mut rate = 0.0;
    for &(start, end) in &layout.segments {
        segments.push(Segment { start, end, rate_at_start: rate });
        rate += k.log_weight(end) - k.log_weight(start);
    }
    let mut sol = BroadcastSolution {
        dist: dist.clone(),
        power,
        lambda,
        segments,
        flat_levels: layout.flat_levels,
        total_rate: rate,
        average_rate: 0.0,
    };
    sol.average_rate = sol.average_rate_under(&*dist)?;
    Ok(sol)
}

fn validate_monotone(k: &Kernel, power: f64, segments: &[(f64, f64)]) -> Result<(), BroadcastError> {
    let span = segments[segments.len() - 1].1 - segments[0].0;
    let floor = -1e-9 * power / span.max(f64::MIN_POSITIVE);
    let per_segment = (VALIDATION_POINTS / segments.len()).max(16);
    for &(start, end) in segments {
        for i in 0..=per_segment {
            let u = start + (end - start) * i as f64 / per_segment as f64;
            let rho = k.density(u);
            if rho < floor || rho.is_nan() {
                return Err(BroadcastError::NonMonotone { at: u, density: rho });
            }
        }
    }
    Ok(())
}

/// Optimal layering without a cap on the total rate.
///
/// Used directly on a fading law, on the equivalent-gain law of a
/// compress-forward relay, or on the mixture law of a random capacity.
pub fn solve_unconstrained(dist: Arc<dyn FadingDistribution>, power: f64) -> Result<BroadcastSolution, BroadcastError> {
    check_power(power)?;
    let k = Kernel { dist: &*dist, lambda: 0.0 };
    let (lo, hi) = scan_range(&k, power)?;
    if reemerges(&k, lo, hi) {
        return assemble(dist.clone(), power, 0.0, ironed_layout(&k, power, lo, hi)?);
    }
    match assemble(dist.clone(), power, 0.0, regular_layout(&k, power, lo, hi)?) {
        // `I*` can also rise without touching zero again.
        Err(BroadcastError::NonMonotone { .. }) => assemble(dist.clone(), power, 0.0, ironed_layout(&k, power, lo, hi)?),
        other => other,
    }
}

/// Decode-forward layering whose total rate may not exceed the bottleneck
/// capacity.
///
/// The cap is slack when the unconstrained total rate fits; otherwise the
/// multiplier is `λ = 1 - F(u1) - u1 f(u1) > 0`, which makes `I*(u1) = 0`, and
/// `u1` is chosen so that `u1² f(u1) = e^{2C} u0² f(u0)`, i.e. the total rate
/// equals `C`.
pub fn solve_df_constrained(fading: Arc<dyn FadingDistribution>, cfg: &ChannelConfig) -> Result<BroadcastSolution, BroadcastError> {
    let unconstrained = solve_unconstrained(fading.clone(), cfg.power)?;
    if unconstrained.total_rate() <= cfg.capacity {
        return Ok(unconstrained);
    }
    if unconstrained.is_ironed() {
        return Err(BroadcastError::IrregularConstrained);
    }
    let dist = &*fading;
    let power = cfg.power;
    let capacity = cfg.capacity;
    let no_bracket = || BroadcastError::NoConstrainedBracket { unconstrained_total: unconstrained.total_rate(), capacity };
    let multiplier = |u1: f64| dist.ccdf(u1) - u1 * dist.pdf(u1);
    let total_for = |u1: f64| -> Result<f64, BroadcastError> {
        let k = Kernel { dist, lambda: multiplier(u1) };
        let u0 = lower_boundary(&k, power, u1)?;
        Ok(k.log_weight(u1) - k.log_weight(u0))
    };

    let u1_hi = unconstrained.u1();
    let mut u1_lo = u1_hi;
    let mut found = false;
    for _ in 0..400 {
        u1_lo *= 0.9;
        match total_for(u1_lo) {
            Ok(rate) if rate < capacity => {
                found = true;
                break;
            }
            Ok(_) => {}
            Err(_) => return Err(no_bracket()),
        }
    }
    if !found {
        return Err(no_bracket());
    }
    let u1 = find_root(
        |u| total_for(u).map(|r| r - capacity).unwrap_or(f64::NAN),
        u1_lo,
        u1_hi,
        Tolerance::tight().with_max_iter(300),
    )?;
    let lambda = multiplier(u1);
    let k = Kernel { dist, lambda };
    let u0 = lower_boundary(&k, power, u1)?;
    let sol = assemble(fading.clone(), power, lambda, Layout { segments: vec![(u0, u1)], flat_levels: Vec::new() })?;
    if !((sol.total_rate() - capacity).abs() <= RATE_MATCH_TOL) || !(lambda > 0.0) {
        return Err(BroadcastError::ConstraintMismatch { total_rate: sol.total_rate(), capacity, lambda });
    }
    Ok(sol)
}

/// Decode-forward layering, falling back to the single-layer solution when
/// the continuum solver fails.
#[derive(Debug, Clone)]
pub enum DfLayering {
    Continuum(BroadcastSolution),
    SingleLayerFallback { solution: SingleLayerSolution, reason: BroadcastError },
}

impl DfLayering {
    pub fn average_rate(&self) -> f64 {
        match self {
            DfLayering::Continuum(sol) => sol.average_rate(),
            DfLayering::SingleLayerFallback { solution, .. } => solution.average_rate,
        }
    }
}

pub fn solve_df_layering(fading: Arc<dyn FadingDistribution>, cfg: &ChannelConfig) -> Result<DfLayering, BroadcastError> {
    match solve_df_constrained(fading.clone(), cfg) {
        Ok(sol) => Ok(DfLayering::Continuum(sol)),
        Err(reason) => {
            let solution = df_single_layer(cfg, &*fading)?;
            Ok(DfLayering::SingleLayerFallback { solution, reason })
        }
    }
}
