//! One rate per (capacity, SNR, scheme).

use std::fmt;
use std::sync::Arc;

use ibcast_core::pointwise::{ergodic_df, ergodic_oblivious, ergodic_oblivious_uncertain};
use ibcast_core::single_layer::{df_single_layer, oblivious_single_layer, uncertain_single_layer};
use ibcast_core::{
    equivalent_distribution, mixture_distribution, solve_df_layering, solve_unconstrained, BroadcastSolution,
    ChannelConfig, DfLayering, FadingDistribution, Reference, Scheme, SingleLayerSolution,
};
use rayon::prelude::*;

use crate::spec::{db_to_linear, CapacitySpec, SweepSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    /// The decode-forward layering failed and the single-layer rate is reported.
    FallbackSingleLayer,
    Error(String),
}

impl RowStatus {
    pub fn parse(s: &str) -> Self {
        match s {
            "ok" => RowStatus::Ok,
            "fallback-single-layer" => RowStatus::FallbackSingleLayer,
            other => RowStatus::Error(other.strip_prefix("error: ").unwrap_or(other).to_string()),
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, RowStatus::Error(_))
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowStatus::Ok => f.write_str("ok"),
            RowStatus::FallbackSingleLayer => f.write_str("fallback-single-layer"),
            RowStatus::Error(e) => write!(f, "error: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub snr_db: f64,
    pub p_linear: f64,
    pub scheme: Scheme,
    pub capacity_spec: String,
    pub rate_nats: Option<f64>,
    pub s_th: Option<f64>,
    pub u0: Option<f64>,
    pub u1: Option<f64>,
    pub lambda: Option<f64>,
    pub status: RowStatus,
}

/// Solver output behind a row, kept for diagnostics and Monte Carlo checks.
#[derive(Debug, Clone)]
pub enum Computed {
    Ergodic(f64),
    SingleLayer(SingleLayerSolution),
    Broadcast(BroadcastSolution),
    Fallback { solution: SingleLayerSolution, reason: String },
    /// Nothing to layer: the bottleneck carries no information.
    Silent,
}

impl Computed {
    pub fn rate(&self) -> f64 {
        match self {
            Computed::Ergodic(r) => *r,
            Computed::SingleLayer(s) | Computed::Fallback { solution: s, .. } => s.average_rate,
            Computed::Broadcast(b) => b.average_rate(),
            Computed::Silent => 0.0,
        }
    }

    pub fn reference(&self) -> Reference {
        match self {
            Computed::Ergodic(_) => Reference::Ergodic,
            Computed::SingleLayer(s) | Computed::Fallback { solution: s, .. } => Reference::SingleLayer(*s),
            Computed::Broadcast(b) => Reference::Broadcast(b.clone()),
            Computed::Silent => Reference::SingleLayer(SingleLayerSolution { threshold: 0.0, allocated_rate: 0.0, average_rate: 0.0 }),
        }
    }
}

/// Runs one scheme. Fixed-capacity schemes given atoms use their mean;
/// uncertain-capacity schemes given a fixed value treat it as one atom.
pub fn compute(scheme: Scheme, power: f64, capacity: &CapacitySpec, fading: &Arc<dyn FadingDistribution>) -> Result<Computed, String> {
    let c = capacity.model.fixed_value();
    let cfg = ChannelConfig::new(power, c).map_err(|e| e.to_string())?;
    let atoms = capacity.model.atoms();
    let f = &**fading;
    let s = |e: &dyn fmt::Display| e.to_string();
    Ok(match scheme {
        Scheme::ObliviousSingleLayer => Computed::SingleLayer(oblivious_single_layer(&cfg, f).map_err(|e| s(&e))?),
        Scheme::ObliviousErgodic => Computed::Ergodic(ergodic_oblivious(&cfg, f).map_err(|e| s(&e))?),
        Scheme::ObliviousBroadcast => {
            if c == 0.0 {
                Computed::Silent
            } else {
                let eq = Arc::new(equivalent_distribution(fading.clone(), cfg).map_err(|e| s(&e))?);
                Computed::Broadcast(solve_unconstrained(eq, power).map_err(|e| s(&e))?)
            }
        }
        Scheme::DfSingleLayer => Computed::SingleLayer(df_single_layer(&cfg, f).map_err(|e| s(&e))?),
        Scheme::DfErgodic => Computed::Ergodic(ergodic_df(&cfg, f).map_err(|e| s(&e))?),
        Scheme::DfBroadcast => {
            if c == 0.0 {
                Computed::Silent
            } else {
                match solve_df_layering(fading.clone(), &cfg).map_err(|e| s(&e))? {
                    DfLayering::Continuum(b) => Computed::Broadcast(b),
                    DfLayering::SingleLayerFallback { solution, reason } => Computed::Fallback { solution, reason: reason.to_string() },
                }
            }
        }
        Scheme::UncertainSingleLayer => Computed::SingleLayer(uncertain_single_layer(power, &atoms, f).map_err(|e| s(&e))?),
        Scheme::UncertainErgodic => Computed::Ergodic(ergodic_oblivious_uncertain(power, &atoms, f).map_err(|e| s(&e))?),
        Scheme::UncertainBroadcast => {
            if atoms.c_max() == 0.0 {
                Computed::Silent
            } else {
                let mix = Arc::new(mixture_distribution(fading.clone(), power, atoms).map_err(|e| s(&e))?);
                Computed::Broadcast(solve_unconstrained(mix, power).map_err(|e| s(&e))?)
            }
        }
    })
}

pub fn make_row(scheme: Scheme, snr_db: f64, capacity: &CapacitySpec, result: &Result<Computed, String>) -> RateRow {
    let mut row = RateRow {
        snr_db,
        p_linear: db_to_linear(snr_db),
        scheme,
        capacity_spec: capacity.label.clone(),
        rate_nats: None,
        s_th: None,
        u0: None,
        u1: None,
        lambda: None,
        status: RowStatus::Ok,
    };
    match result {
        Err(e) => row.status = RowStatus::Error(e.clone()),
        Ok(computed) => {
            row.rate_nats = Some(computed.rate());
            match computed {
                Computed::SingleLayer(sl) => row.s_th = Some(sl.threshold),
                Computed::Fallback { solution, .. } => {
                    row.s_th = Some(solution.threshold);
                    row.status = RowStatus::FallbackSingleLayer;
                }
                Computed::Broadcast(b) => {
                    row.u0 = Some(b.u0());
                    row.u1 = Some(b.u1());
                    row.lambda = Some(b.lambda());
                }
                Computed::Ergodic(_) | Computed::Silent => {}
            }
        }
    }
    row
}

/// Jobs in output order: capacity, then SNR, then scheme.
pub fn jobs(spec: &SweepSpec) -> Vec<(usize, f64, Scheme)> {
    let mut out = Vec::new();
    for ci in 0..spec.capacities.len() {
        for &snr in &spec.snr_db {
            for &scheme in &spec.schemes {
                out.push((ci, snr, scheme));
            }
        }
    }
    out
}

pub fn run_sweep_with(spec: &SweepSpec, fading: &Arc<dyn FadingDistribution>) -> Vec<RateRow> {
    jobs(spec)
        .into_par_iter()
        .map(|(ci, snr, scheme)| {
            let cap = &spec.capacities[ci];
            let result = compute(scheme, db_to_linear(snr), cap, fading);
            make_row(scheme, snr, cap, &result)
        })
        .collect()
}

/// Rows are computed concurrently; their order is fixed by [`jobs`].
pub fn run_sweep(spec: &SweepSpec) -> Vec<RateRow> {
    run_sweep_with(spec, &spec.fading.distribution())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::FadingKind;

    fn spec(snr: &[f64], caps: &[&str], schemes: &[Scheme]) -> SweepSpec {
        SweepSpec {
            snr_db: snr.to_vec(),
            capacities: caps.iter().map(|c| CapacitySpec::parse(c).unwrap()).collect(),
            schemes: schemes.to_vec(),
            fading: FadingKind::Rayleigh,
            output: None,
        }
    }

    #[test]
    fn zero_capacity_gives_zero_rate() {
        let rows = run_sweep(&spec(&[0.0], &["0"], &Scheme::ALL));
        assert_eq!(rows.len(), 9);
        for r in rows {
            assert_eq!(r.rate_nats, Some(0.0), "{}", r.scheme);
            assert_eq!(r.status, RowStatus::Ok);
        }
    }

    #[test]
    fn broadcast_dominates_single_layer() {
        let rows = run_sweep(&spec(&[0.0, 15.0, 30.0], &["2"], &[Scheme::ObliviousSingleLayer, Scheme::ObliviousBroadcast]));
        for pair in rows.chunks(2) {
            assert!(pair[1].rate_nats.unwrap() >= pair[0].rate_nats.unwrap());
            assert!(pair[0].u0.is_none() && pair[0].s_th.is_some());
            assert!(pair[1].u0.is_some() && pair[1].s_th.is_none());
        }
    }

    #[test]
    fn fixed_capacity_beats_uncertain_at_high_snr() {
        let s = spec(&[30.0], &["4", "2:0.333333;5:0.666667"], &Scheme::ALL);
        let rows = run_sweep(&s);
        let (fixed, uncertain) = rows.split_at(9);
        let pairs = [
            (Scheme::ObliviousSingleLayer, Scheme::UncertainSingleLayer),
            (Scheme::ObliviousBroadcast, Scheme::UncertainBroadcast),
            (Scheme::ObliviousErgodic, Scheme::UncertainErgodic),
        ];
        for (a, b) in pairs {
            let fa = fixed.iter().find(|r| r.scheme == a).unwrap().rate_nats.unwrap();
            let ub = uncertain.iter().find(|r| r.scheme == b).unwrap().rate_nats.unwrap();
            assert!(fa >= ub, "{a} {fa} vs {b} {ub}");
        }
    }

    #[test]
    fn row_order_is_capacity_snr_scheme() {
        let s = spec(&[0.0, 10.0], &["1", "3"], &[Scheme::DfErgodic, Scheme::ObliviousErgodic]);
        let order: Vec<(String, f64, Scheme)> = run_sweep(&s).into_iter().map(|r| (r.capacity_spec, r.snr_db, r.scheme)).collect();
        assert_eq!(order[0], ("1".into(), 0.0, Scheme::DfErgodic));
        assert_eq!(order[1], ("1".into(), 0.0, Scheme::ObliviousErgodic));
        assert_eq!(order[2], ("1".into(), 10.0, Scheme::DfErgodic));
        assert_eq!(order[4], ("3".into(), 0.0, Scheme::DfErgodic));
    }
}
