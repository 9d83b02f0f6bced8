//! Scalar numerics shared by every solver in the crate.
//!
//! Three primitives live here: globally adaptive Gauss–Kronrod quadrature
//! (finite and `[a, ∞)` ranges), Brent's bracketed root finder, and a
//! grid-then-refine scalar maximizer. All of them are pure functions of
//! their inputs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// Number of points in the coarse scan of [`maximize_scalar`].
pub const SEARCH_GRID_POINTS: usize = 2001;

/// Convergence settings for the iterative routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_iter: usize,
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64, max_iter: usize) -> Result<Self, NumericsError> {
        if !(rel > 0.0) || !(abs >= 0.0) || !rel.is_finite() || !abs.is_finite() || max_iter == 0 {
            return Err(NumericsError::InvalidTolerance { rel, abs, max_iter });
        }
        Ok(Self { rel, abs, max_iter })
    }

    /// Tight setting used for boundary equations of the layering solvers.
    pub fn tight() -> Self {
        Self { rel: 4.0 * f64::EPSILON, abs: 1e-300, max_iter: 400 }
    }

    pub fn with_max_iter(self, max_iter: usize) -> Self {
        Self { max_iter: max_iter.max(1), ..self }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-9, abs: 1e-12, max_iter: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("invalid tolerance (rel={rel}, abs={abs}, max_iter={max_iter})")]
    InvalidTolerance { rel: f64, abs: f64, max_iter: usize },
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    InvalidBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no convergence after {iterations} iterations (estimate {estimate}, error bound {error_bound})")]
    NoConvergence { estimate: f64, error_bound: f64, iterations: usize },
    #[error("function returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

// Gauss–Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel, NumericsError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() { Ok(y) } else { Err(NumericsError::NonFinite { x }) }
    };
    let fc = eval(center)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = eval(center - dx)? + eval(center + dx)?;
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok(Panel { a, b, value: kron * half, error: ((kron - gauss) * half).abs() })
}

/// Integrates `f` over `[a, b]`; `b` may be `f64::INFINITY`.
///
/// Infinite upper limits are mapped onto `[0, 1)` through `u = a + t/(1-t)`,
/// which is adequate for the exponentially decaying integrands used here.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64, NumericsError> {
    if a.is_nan() || b.is_nan() || a > b || a.is_infinite() {
        return Err(NumericsError::InvalidInterval { lo: a, hi: b });
    }
    if a == b {
        return Ok(0.0);
    }
    if b.is_infinite() {
        let mapped = |t: f64| {
            let d = 1.0 - t;
            let u = a + t / d;
            if !u.is_finite() {
                return 0.0;
            }
            f(u) / (d * d)
        };
        return adaptive(&mapped, 0.0, 1.0, tol);
    }
    adaptive(&f, a, b, tol)
}

/// Integrates over `[a, b]` after splitting at the given interior points.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<f64, NumericsError> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut lo = a;
    let mut total = 0.0;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        total += integrate(&f, lo, hi, tol)?;
        lo = hi;
    }
    Ok(total)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<f64, NumericsError> {
    let first = kronrod(f, a, b)?;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    // Panels that can no longer be bisected in floating point.
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    heap.push(first);
    let mut iterations = 0;
    while error > tol.target(value) {
        if iterations >= tol.max_iter {
            return Err(NumericsError::NoConvergence { estimate: value, error_bound: error, iterations });
        }
        let Some(worst) = heap.pop() else { break };
        iterations += 1;
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) <= 64.0 * f64::EPSILON * mid.abs() {
            frozen_value += worst.value;
            frozen_error += worst.error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let left = kronrod(f, worst.a, mid)?;
        let right = kronrod(f, mid, worst.b)?;
        heap.push(left);
        heap.push(right);
        value = frozen_value + heap.iter().map(|p| p.value).sum::<f64>();
        error = frozen_error + heap.iter().map(|p| p.error).sum::<f64>();
    }
    if error > tol.target(value) {
        return Err(NumericsError::NoConvergence { estimate: value, error_bound: error, iterations });
    }
    Ok(value)
}

/// Brent's method on a sign-changing bracket. The returned point always lies
/// in `[lo, hi]`.
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64, NumericsError> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(NumericsError::InvalidInterval { lo, hi });
    }
    let eval = |x: f64| {
        let y = f(x);
        if y.is_nan() { Err(NumericsError::NonFinite { x }) } else { Ok(y) }
    };
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (eval(a)?, eval(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::InvalidBracket { lo, hi, f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.target(b);
        let m = 0.5 * (c - b);
        if m.abs() <= tol1 || fb == 0.0 {
            return Ok(b.clamp(lo, hi));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = eval(b)?;
    }
    Err(NumericsError::NoConvergence {
        estimate: b.clamp(lo, hi),
        error_bound: (c - b).abs(),
        iterations: tol.max_iter,
    })
}

/// Walks consecutive points of `grid` and returns the first adjacent pair on
/// which `f` changes sign (a zero at a grid point counts as a change).
pub fn first_sign_change<F, I>(f: F, grid: I) -> Option<(f64, f64)>
where
    F: Fn(f64) -> f64,
    I: IntoIterator<Item = f64>,
{
    let mut prev: Option<(f64, f64)> = None;
    for x in grid {
        let y = f(x);
        if y.is_nan() {
            continue;
        }
        if let Some((xp, yp)) = prev {
            if y == 0.0 || yp.signum() != y.signum() {
                return Some((xp, x));
            }
        }
        prev = Some((x, y));
    }
    None
}

/// `n` points from `lo` to `hi` inclusive; geometric when `lo > 0`.
pub fn search_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let last = (n - 1) as f64;
    if lo > 0.0 {
        let ratio = (hi / lo).ln();
        (0..n)
            .map(|i| if i + 1 == n { hi } else { lo * (ratio * i as f64 / last).exp() })
            .collect()
    } else {
        (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / last })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub arg: f64,
    pub value: f64,
}

/// Maximizes `f` on `[lo, hi]`: a scan over [`search_grid`] with
/// [`SEARCH_GRID_POINTS`] points, then Brent refinement around the best grid
/// point. Ties keep the smallest argument.
pub fn maximize_scalar<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<Maximum, NumericsError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(NumericsError::InvalidInterval { lo, hi });
    }
    let grid = search_grid(lo, hi, SEARCH_GRID_POINTS);
    let mut best = Maximum { arg: lo, value: f64::NEG_INFINITY };
    let mut best_idx = 0;
    for (i, &x) in grid.iter().enumerate() {
        let y = f(x);
        if !y.is_finite() {
            return Err(NumericsError::NonFinite { x });
        }
        if y > best.value {
            best = Maximum { arg: x, value: y };
            best_idx = i;
        }
    }
    let left = grid[best_idx.saturating_sub(1)];
    let right = grid[(best_idx + 1).min(grid.len() - 1)];
    if right > left {
        let refined = brent_maximize(&f, left, right, tol)?;
        if refined.value > best.value {
            best = refined;
        }
    }
    Ok(best)
}

fn brent_maximize<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: Tolerance) -> Result<Maximum, NumericsError> {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() { Ok(-y) } else { Err(NumericsError::NonFinite { x }) }
    };
    let rel = tol.rel.max(f64::EPSILON.sqrt());
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..tol.max_iter {
        let m = 0.5 * (a + b);
        let tol1 = rel * x.abs() + tol.abs.max(1e-300);
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(m - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = eval(u)?;
        if fu <= fx {
            if u >= x { a = x } else { b = x }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x { a = u } else { b = u }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(Maximum { arg: x, value: -fx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrates_polynomial_and_exponential_tail() {
        let tol = Tolerance::default();
        assert_abs_diff_eq!(integrate(|x| x, 0.0, 1.0, tol).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(integrate(|u: f64| (-u).exp(), 0.0, f64::INFINITY, tol).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(integrate(|u: f64| (-u).exp(), 2.0, f64::INFINITY, tol).unwrap(), (-2.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn degenerate_and_reversed_intervals() {
        let tol = Tolerance::default();
        assert_eq!(integrate(|x| x, 1.0, 1.0, tol).unwrap(), 0.0);
        assert!(matches!(integrate(|x| x, 2.0, 1.0, tol), Err(NumericsError::InvalidInterval { .. })));
    }

    #[test]
    fn nonconvergence_carries_estimate() {
        let tol = Tolerance::new(1e-15, 0.0, 2).unwrap();
        match integrate(|x: f64| x.abs().sqrt(), -1.0, 1.3, tol) {
            Err(NumericsError::NoConvergence { estimate, error_bound, .. }) => {
                assert!((estimate - (2.0 / 3.0) * (1.0 + 1.3f64.powf(1.5))).abs() < 1e-2);
                assert!(error_bound > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn split_integration_handles_kinks() {
        let tol = Tolerance::default();
        let v = integrate_split(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3, 5.0], tol).unwrap();
        assert_abs_diff_eq!(v, 0.5 * 0.09 + 0.5 * 0.49, epsilon = 1e-14);
    }

    #[test]
    fn root_examples() {
        let tol = Tolerance::default();
        let r = find_root(|x| x * x - 2.0, 1.0, 2.0, tol).unwrap();
        assert_abs_diff_eq!(r, 2f64.sqrt(), epsilon = 1e-9);
        let r = find_root(|x| (1.0 - x) / (x * x) - 10.0, 0.01, 1.0, tol).unwrap();
        assert_abs_diff_eq!(r, (41f64.sqrt() - 1.0) / 20.0, epsilon = 1e-9);
        assert!(matches!(find_root(|x| x * x + 1.0, -1.0, 2.0, tol), Err(NumericsError::InvalidBracket { .. })));
    }

    #[test]
    fn root_nonconvergence_is_distinct_from_bracket_error() {
        let tol = Tolerance::new(1e-16, 0.0, 1).unwrap();
        assert!(matches!(find_root(|x| x.powi(3) - 0.3, 0.0, 1.0, tol), Err(NumericsError::NoConvergence { .. })));
    }

    #[test]
    fn maximize_examples() {
        let tol = Tolerance::default();
        let m = maximize_scalar(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, tol).unwrap();
        assert_abs_diff_eq!(m.arg, 0.3, epsilon = 1e-7);
        assert_abs_diff_eq!(m.value, 0.0, epsilon = 1e-14);

        let m = maximize_scalar(|_| 2.5, 1.0, 4.0, tol).unwrap();
        assert!((1.0..=4.0).contains(&m.arg));
        assert_eq!(m.value, 2.5);
    }

    #[test]
    fn maximize_outage_objective_matches_dense_grid() {
        // Oracle: 10^6-point dense grid on [0, 20].
        let f = |x: f64| (-x).exp() * 0.5 * (10.0 * x).ln_1p();
        let n = 1_000_000;
        let (mut arg, mut val) = (0.0, f64::NEG_INFINITY);
        for i in 0..=n {
            let x = 20.0 * i as f64 / n as f64;
            if f(x) > val {
                val = f(x);
                arg = x;
            }
        }
        let m = maximize_scalar(f, 0.0, 20.0, Tolerance::default()).unwrap();
        assert!((m.arg - arg).abs() < 1e-4);
        assert!(m.value >= val - 1e-12);
        assert_abs_diff_eq!(m.arg, 0.473, epsilon = 5e-4);
        assert_abs_diff_eq!(m.value, 0.544, epsilon = 5e-4);
    }

    #[test]
    fn maximize_rejects_non_finite() {
        let r = maximize_scalar(|x: f64| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, Tolerance::default());
        assert!(matches!(r, Err(NumericsError::NonFinite { .. })));
    }

    #[test]
    fn search_grid_is_geometric_for_positive_lower_bound() {
        let g = search_grid(1e-3, 10.0, 5);
        assert_eq!(g.len(), 5);
        assert_abs_diff_eq!(g[1] / g[0], g[2] / g[1], epsilon = 1e-12);
        assert_eq!(*g.last().unwrap(), 10.0);
        let g = search_grid(0.0, 1.0, 5);
        assert_abs_diff_eq!(g[1], 0.25, epsilon = 1e-15);
    }
}
