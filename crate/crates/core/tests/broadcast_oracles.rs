use std::sync::Arc;

use ibcast_core::numerics::{find_root, integrate_split, Tolerance};
use ibcast_core::{
    equivalent_distribution, mixture_distribution, solve_df_constrained, solve_unconstrained, BroadcastSolution,
    CapacityDistribution, ChannelConfig, FadingDistribution, Rayleigh,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ray() -> Arc<dyn FadingDistribution> {
    Arc::new(Rayleigh)
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// `½ ∫ [(1 - G) I / (1 + u I) - g ln(1 + u I)] du`, the average rate of a
/// non-increasing residual power profile written pointwise.
fn pointwise_functional(dist: &dyn FadingDistribution, profile: &dyn Fn(f64) -> f64, cuts: &[f64], top: f64) -> f64 {
    let mut breaks: Vec<f64> = cuts.to_vec();
    breaks.extend(dist.breakpoints());
    let f = |u: f64| {
        let i = profile(u);
        0.5 * (dist.ccdf(u) * i / (1.0 + u * i) - dist.pdf(u) * (u * i).ln_1p())
    };
    integrate_split(f, 0.0, top, &breaks, Tolerance::new(1e-11, 1e-14, 400).unwrap()).unwrap()
}

fn solution_functional(sol: &BroadcastSolution) -> f64 {
    let mut cuts = vec![sol.u0(), sol.u1()];
    for seg in sol.segments() {
        cuts.push(seg.start);
        cuts.push(seg.end);
    }
    pointwise_functional(&**sol.distribution(), &|u| sol.residual_power(u), &cuts, sol.u1())
}

/// `I*(u)` for an unconstrained layering, computed from the gain law alone.
fn pointwise_optimum(dist: &dyn FadingDistribution, u: f64) -> f64 {
    (dist.ccdf(u) - u * dist.pdf(u)) / (u * u * dist.pdf(u))
}

#[test]
fn functional_matches_average_rate_on_regular_layerings() {
    for p in [1.0, 10.0, 100.0, 1000.0] {
        let sol = solve_unconstrained(ray(), p).unwrap();
        assert!((solution_functional(&sol) - sol.average_rate()).abs() <= 1e-7, "P={p}");
        for c in [1.0, 4.0] {
            let eq = Arc::new(equivalent_distribution(ray(), ChannelConfig::new(p, c).unwrap()).unwrap());
            let sol = solve_unconstrained(eq, p).unwrap();
            assert!((solution_functional(&sol) - sol.average_rate()).abs() <= 1e-7, "P={p} C={c}");
        }
    }
}

#[test]
fn functional_matches_average_rate_on_constrained_layerings() {
    let cfg = ChannelConfig::new(100.0, 1.0).unwrap();
    let sol = solve_df_constrained(ray(), &cfg).unwrap();
    assert!(sol.lambda() > 0.0);
    assert!((solution_functional(&sol) - sol.average_rate()).abs() <= 1e-7);
}

#[test]
fn constrained_layering_is_continuous_across_the_slack_point() {
    for p in [10.0, 100.0] {
        let free = solve_unconstrained(ray(), p).unwrap();
        let total = free.total_rate();
        for c in [total - 1e-5, total - 1e-7, total + 1e-7] {
            let sol = solve_df_constrained(ray(), &ChannelConfig::new(p, c).unwrap()).unwrap();
            assert!((sol.u0() - free.u0()).abs() <= 1e-4, "P={p} C={c}");
            assert!((sol.u1() - free.u1()).abs() <= 1e-4, "P={p} C={c}");
        }
    }
}

fn two_atoms() -> CapacityDistribution {
    CapacityDistribution::new([(2.0, 1.0 / 3.0), (5.0, 2.0 / 3.0)]).unwrap()
}

#[test]
fn ironed_layering_is_consistent() {
    for snr in [20.0, 25.0, 30.0] {
        let p = db(snr);
        let mix = Arc::new(mixture_distribution(ray(), p, two_atoms()).unwrap());
        let sol = solve_unconstrained(mix, p).unwrap();
        assert!(sol.is_ironed(), "{snr} dB");
        assert!((solution_functional(&sol) - sol.average_rate()).abs() <= 1e-7, "{snr} dB");
        assert!((sol.average_rate_by_parts().unwrap() - sol.average_rate()).abs() <= 1e-6);
        assert!((sol.total_rate_by_quadrature().unwrap() - sol.total_rate()).abs() <= 1e-6);
        let mut prev = f64::INFINITY;
        for i in 0..=4000 {
            let u = sol.u1() * 1.01 * i as f64 / 4000.0;
            let r = sol.residual_power(u);
            assert!(r <= prev + 1e-9 * p, "{snr} dB: residual power rises at {u}");
            assert!((0.0..=p * (1.0 + 1e-9)).contains(&r));
            prev = r;
        }
    }
}

/// Flat level `c` inserted into `I*` between its crossings of `c` around the
/// solver's flat stretch, and the resulting value of the functional.
#[test]
fn mixture_layerings_across_atom_sets() {
    let sets: [&[(f64, f64)]; 6] = [
        &[(0.5, 0.5), (1.5, 0.5)],
        &[(1.0, 0.25), (3.0, 0.75)],
        &[(0.0, 0.2), (2.0, 0.8)],
        &[(0.5, 0.2), (2.0, 0.3), (6.0, 0.5)],
        &[(0.3, 0.3), (1.0, 0.3), (3.0, 0.2), (8.0, 0.2)],
        &[(1.0, 0.5), (1.2, 0.5)],
    ];
    for atoms in sets {
        let caps = CapacityDistribution::new(atoms.iter().copied()).unwrap();
        for snr in [-1.0, 3.0, 10.0, 20.0, 30.0, 37.0, 40.0] {
            let p = db(snr);
            let mix = Arc::new(mixture_distribution(ray(), p, caps.clone()).unwrap());
            let at = format!("{atoms:?} {snr} dB");
            let sol = solve_unconstrained(mix, p).unwrap_or_else(|e| panic!("{at}: {e}"));
            assert!((solution_functional(&sol) - sol.average_rate()).abs() <= 1e-7, "{at}");
            assert!((sol.average_rate_by_parts().unwrap() - sol.average_rate()).abs() <= 1e-6, "{at}");
            let mut last = f64::INFINITY;
            for i in 0..=200 {
                let u = sol.u0() + (sol.u1() - sol.u0()) * i as f64 / 200.0;
                let r = sol.residual_power(u);
                assert!(r <= last + 1e-9 * p.max(1.0) && r >= -1e-12 * p.max(1.0), "{at} u={u} r={r} last={last} u1={}", sol.u1());
                last = r;
            }
        }
    }
}

fn functional_with_level(sol: &BroadcastSolution, c: f64) -> f64 {
    let dist = sol.distribution().clone();
    let p = sol.power();
    let segs = sol.segments();
    let (left, right) = (segs[0].start, segs[1].end);
    let f = |u: f64| pointwise_optimum(&*dist, u) - c;
    let a = {
        let mut lo = segs[0].end;
        while f(lo) < 0.0 {
            lo = left + 0.99 * (lo - left);
        }
        let mut hi = segs[0].end;
        while f(hi) > 0.0 {
            hi *= 1.001;
        }
        find_root(f, lo, hi, Tolerance::tight()).unwrap()
    };
    let b = {
        let mut hi = segs[1].start;
        while f(hi) > 0.0 {
            hi = hi + 0.01 * (right - hi);
        }
        let mut lo = segs[1].start;
        while f(lo) < 0.0 {
            lo *= 0.999;
        }
        find_root(f, lo, hi, Tolerance::tight()).unwrap()
    };
    let (u0, u1) = (sol.u0(), sol.u1());
    let profile = |u: f64| {
        if u < u0 {
            p
        } else if u >= a && u <= b {
            c
        } else if u > u1 {
            0.0
        } else {
            pointwise_optimum(&*dist, u).clamp(0.0, p)
        }
    };
    pointwise_functional(&*dist, &profile, &[u0, a, b, u1], u1)
}

#[test]
fn ironed_level_is_locally_optimal() {
    let p = db(30.0);
    let mix = Arc::new(mixture_distribution(ray(), p, two_atoms()).unwrap());
    let sol = solve_unconstrained(mix, p).unwrap();
    let c = sol.flat_levels()[0];
    let at = functional_with_level(&sol, c);
    assert!((at - sol.average_rate()).abs() <= 1e-6);
    for rel in [0.2, 0.05, 0.01] {
        assert!(functional_with_level(&sol, c * (1.0 + rel)) < at, "+{rel}");
        assert!(functional_with_level(&sol, c * (1.0 - rel)) < at, "-{rel}");
    }
}

#[test]
fn ironing_beats_truncation_at_first_zero() {
    let p = db(30.0);
    let mix = Arc::new(mixture_distribution(ray(), p, two_atoms()).unwrap());
    let sol = solve_unconstrained(mix.clone(), p).unwrap();
    let numerator = |u: f64| mix.ccdf(u) - u * mix.pdf(u);
    let grid = ibcast_core::numerics::search_grid(sol.u0(), sol.u1(), 20_000);
    let (lo, hi) = ibcast_core::numerics::first_sign_change(numerator, grid).unwrap();
    let first_zero = find_root(numerator, lo, hi, Tolerance::tight()).unwrap();
    assert!(first_zero < sol.segments()[1].start);
    let u0 = sol.u0();
    let truncated = |u: f64| {
        if u < u0 {
            p
        } else if u > first_zero {
            0.0
        } else {
            pointwise_optimum(&*mix, u).clamp(0.0, p)
        }
    };
    let j = pointwise_functional(&*mix, &truncated, &[u0, first_zero], first_zero);
    assert!(sol.average_rate() > j + 0.1, "ironed {} truncated {j}", sol.average_rate());
}

#[test]
fn monte_carlo_rayleigh_average() {
    let sol = solve_unconstrained(ray(), 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 1_000_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let s = -(-rng.random::<f64>()).ln_1p();
        let r = sol.rate_allocation(s);
        sum += r;
        sq += r * r;
    }
    let mean = sum / n as f64;
    let se = ((sq / n as f64 - mean * mean) / (n - 1) as f64).sqrt();
    assert!((mean - sol.average_rate()).abs() <= 3.0 * se, "mc {mean} analytic {}", sol.average_rate());
}

#[test]
fn finite_differences_on_transformed_and_mixture_laws() {
    let p = db(20.0);
    let eq: Arc<dyn FadingDistribution> = Arc::new(equivalent_distribution(ray(), ChannelConfig::new(p, 2.0).unwrap()).unwrap());
    let mix: Arc<dyn FadingDistribution> = Arc::new(mixture_distribution(ray(), p, two_atoms()).unwrap());
    for dist in [eq, mix] {
        let sol = solve_unconstrained(dist.clone(), p).unwrap();
        for seg in sol.segments() {
            for i in 1..50 {
                let u = seg.start + (seg.end - seg.start) * i as f64 / 50.0;
                let h = 1e-6 * u;
                let fd = (dist.cdf(u + h) - dist.cdf(u - h)) / (2.0 * h);
                assert!((fd - dist.pdf(u)).abs() <= 1e-5 * dist.pdf(u).max(1.0));
                let dr = (sol.rate_allocation(u + h) - sol.rate_allocation(u - h)) / (2.0 * h);
                let incr = 0.5 * sol.power_density(u) * u / (1.0 + sol.residual_power(u) * u);
                assert!((dr - incr).abs() <= 1e-5 * incr.max(1.0), "u={u} fd={dr} incr={incr}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn layering_invariants(snr in -5.0f64..35.0, c in 0.2f64..6.0) {
        let p = db(snr);
        let eq = Arc::new(equivalent_distribution(ray(), ChannelConfig::new(p, c).unwrap()).unwrap());
        let sol = solve_unconstrained(eq, p).unwrap();
        prop_assert!(sol.u0() < sol.u1());
        prop_assert!(sol.total_rate() > 0.0);
        // The equivalent gain never exceeds its limit, so neither can the layering.
        prop_assert!(sol.total_rate() <= c + 1e-9);
        prop_assert!(sol.average_rate() <= sol.total_rate());
        let (r0, r1) = sol.boundary_residuals();
        prop_assert!(r0.abs() <= 1e-8 * p && r1.abs() <= 1e-8 * p);
        let mut prev = 0.0;
        for i in 0..=200 {
            let s = sol.u1() * 1.1 * i as f64 / 200.0;
            let r = sol.rate_allocation(s);
            prop_assert!(r >= prev - 1e-12);
            prev = r;
        }
    }

    #[test]
    fn constrained_layering_meets_capacity(snr in 0.0f64..30.0, c in 0.1f64..3.0) {
        let p = db(snr);
        let sol = solve_df_constrained(ray(), &ChannelConfig::new(p, c).unwrap()).unwrap();
        prop_assert!(sol.total_rate() <= c + 1e-6);
        if sol.lambda() > 0.0 {
            prop_assert!((sol.total_rate() - c).abs() <= 1e-6);
        }
    }
}
