//! Full diagnostics for one (SNR, capacity, scheme).

use std::fmt::Write;

use crate::csv_out::format_number;
use crate::sweep::Computed;

pub fn describe(computed: &Computed) -> String {
    let mut out = String::new();
    let f = format_number;
    match computed {
        Computed::Ergodic(r) => {
            writeln!(out, "average_rate: {}", f(*r)).unwrap();
        }
        Computed::SingleLayer(s) => {
            writeln!(out, "average_rate: {}", f(s.average_rate)).unwrap();
            writeln!(out, "threshold: {}", f(s.threshold)).unwrap();
            writeln!(out, "allocated_rate: {}", f(s.allocated_rate)).unwrap();
        }
        Computed::Fallback { solution, reason } => {
            writeln!(out, "status: fallback-single-layer").unwrap();
            writeln!(out, "reason: {reason}").unwrap();
            writeln!(out, "average_rate: {}", f(solution.average_rate)).unwrap();
            writeln!(out, "threshold: {}", f(solution.threshold)).unwrap();
            writeln!(out, "allocated_rate: {}", f(solution.allocated_rate)).unwrap();
        }
        Computed::Silent => {
            writeln!(out, "average_rate: 0").unwrap();
            writeln!(out, "note: zero bottleneck capacity, nothing to layer").unwrap();
        }
        Computed::Broadcast(b) => {
            let (r0, r1) = b.boundary_residuals();
            writeln!(out, "average_rate: {}", f(b.average_rate())).unwrap();
            writeln!(out, "average_rate_by_parts: {}", b.average_rate_by_parts().map(f).unwrap_or_else(|e| e.to_string())).unwrap();
            writeln!(out, "total_rate: {}", f(b.total_rate())).unwrap();
            writeln!(out, "total_rate_by_quadrature: {}", b.total_rate_by_quadrature().map(f).unwrap_or_else(|e| e.to_string())).unwrap();
            writeln!(out, "u0: {}", f(b.u0())).unwrap();
            writeln!(out, "u1: {}", f(b.u1())).unwrap();
            writeln!(out, "lambda: {}", f(b.lambda())).unwrap();
            writeln!(out, "residual_at_u0: {}", f(r0)).unwrap();
            writeln!(out, "residual_at_u1: {}", f(r1)).unwrap();
            writeln!(out, "ironed: {}", b.is_ironed()).unwrap();
            for (i, seg) in b.segments().iter().enumerate() {
                writeln!(out, "segment {i}: [{}, {}] rate_at_start {}", f(seg.start), f(seg.end), f(seg.rate_at_start)).unwrap();
                if let Some(level) = b.flat_levels().get(i) {
                    writeln!(out, "flat {i}: residual_power {}", f(*level)).unwrap();
                }
            }
            writeln!(out, "profile (u, residual_power, power_density, rate):").unwrap();
            let (u0, u1) = (b.u0(), b.u1());
            for i in 0..=10 {
                let u = u0 + (u1 - u0) * i as f64 / 10.0;
                writeln!(out, "  {} {} {} {}", f(u), f(b.residual_power(u)), f(b.power_density(u)), f(b.rate_allocation(u))).unwrap();
            }
        }
    }
    out
}
