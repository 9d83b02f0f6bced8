//! Analytic rates against seeded Monte Carlo estimates.

use std::io::Write;
use std::sync::Arc;

use ibcast_core::montecarlo::{simulate, SimulationResult, SimulationSpec};
use ibcast_core::FadingDistribution;

use crate::csv_out::format_number;
use crate::spec::{db_to_linear, ArgError, SweepSpec};
use crate::sweep::{compute, jobs, make_row, RateRow};

/// Rows whose |z| exceeds this fail the check.
pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct McRow {
    pub row: RateRow,
    pub analytic: Option<f64>,
    pub mc: Option<SimulationResult>,
    pub z: Option<f64>,
    pub error: Option<String>,
}

/// `(analytic - mean) / std_error`; exact agreement with zero spread is 0.
pub fn z_score(analytic: f64, mc: &SimulationResult) -> f64 {
    let diff = analytic - mc.mean;
    if diff == 0.0 {
        0.0
    } else {
        diff / mc.std_error
    }
}

pub fn mc_check_with(spec: &SweepSpec, n_samples: u64, seed: u64, fading: &Arc<dyn FadingDistribution>) -> Result<Vec<McRow>, ArgError> {
    if n_samples == 0 {
        return Err(ArgError::Other("--samples must be at least 1".into()));
    }
    let mut out = Vec::new();
    for (ci, snr, scheme) in jobs(spec) {
        let cap = &spec.capacities[ci];
        let power = db_to_linear(snr);
        let computed = compute(scheme, power, cap, fading);
        let row = make_row(scheme, snr, cap, &computed);
        let entry = match computed {
            Err(e) => McRow { row, analytic: None, mc: None, z: None, error: Some(e) },
            Ok(c) => {
                let sim = SimulationSpec { scheme, power, capacity: cap.model.clone(), fading: fading.clone(), n_samples, seed };
                match simulate(&sim, &c.reference()) {
                    Ok(r) => McRow { row, analytic: Some(c.rate()), z: Some(z_score(c.rate(), &r)), mc: Some(r), error: None },
                    Err(e) => McRow { row, analytic: Some(c.rate()), mc: None, z: None, error: Some(e.to_string()) },
                }
            }
        };
        out.push(entry);
    }
    Ok(out)
}

pub fn mc_check(spec: &SweepSpec, n_samples: u64, seed: u64) -> Result<Vec<McRow>, ArgError> {
    mc_check_with(spec, n_samples, seed, &spec.fading.distribution())
}

pub fn passed(rows: &[McRow]) -> bool {
    rows.iter().all(|r| r.error.is_none() && r.z.is_some_and(|z| z.abs() <= Z_LIMIT))
}

pub fn write_report<W: Write>(rows: &[McRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["snr_db", "scheme", "capacity_spec", "analytic", "mc_mean", "std_error", "z", "status"])?;
    for r in rows {
        let f = |x: Option<f64>| x.map(format_number).unwrap_or_default();
        let status = match (&r.error, r.z) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(z)) if z.abs() <= Z_LIMIT => "ok".to_string(),
            _ => "z-limit".to_string(),
        };
        w.write_record([
            format_number(r.row.snr_db),
            r.row.scheme.tag().to_string(),
            r.row.capacity_spec.clone(),
            f(r.analytic),
            f(r.mc.map(|m| m.mean)),
            f(r.mc.map(|m| m.std_error)),
            f(r.z),
            status,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{CapacitySpec, FadingKind};
    use ibcast_core::{PointMass, Scheme};

    fn spec(caps: &str, schemes: Vec<Scheme>) -> SweepSpec {
        SweepSpec {
            snr_db: vec![0.0, 10.0],
            capacities: vec![CapacitySpec::parse(caps).unwrap()],
            schemes,
            fading: FadingKind::Rayleigh,
            output: None,
        }
    }

    #[test]
    fn deterministic_fading_gives_zero_z() {
        let pm: Arc<dyn FadingDistribution> = Arc::new(PointMass { at: 1.0 });
        let s = spec("2:0.5;4:0.5", vec![Scheme::ObliviousErgodic, Scheme::DfErgodic]);
        let rows = mc_check_with(&s, 1000, 3, &pm).unwrap();
        for r in &rows {
            assert_eq!(r.z, Some(0.0), "{:?}", r);
            assert_eq!(r.mc.unwrap().std_error, 0.0);
        }
        assert!(passed(&rows));
    }

    #[test]
    fn zero_samples_is_an_argument_error() {
        let s = spec("2", vec![Scheme::DfErgodic]);
        assert!(matches!(mc_check(&s, 0, 1), Err(ArgError::Other(_))));
    }

    #[test]
    fn small_grid_agrees() {
        let s = spec("2:0.5;4:0.5", Scheme::ALL.to_vec());
        let rows = mc_check(&s, 200_000, 42).unwrap();
        for r in &rows {
            assert!(r.z.unwrap().abs() <= Z_LIMIT, "{} {:?}", r.row.scheme, r);
        }
    }
}
