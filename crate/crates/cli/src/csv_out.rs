//! CSV encoding of sweep rows.

use std::io::Write;
use std::path::Path;

use ibcast_core::Scheme;
use thiserror::Error;

use crate::sweep::{RateRow, RowStatus};

pub const HEADER: [&str; 10] = ["snr_db", "p_linear", "scheme", "capacity_spec", "rate_nats", "s_th", "u0", "u1", "lambda", "status"];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: line {line}: {detail}")]
    Parse { path: String, line: u64, detail: String },
}

/// `%.12g`: twelve significant digits, trailing zeros removed, exponent form
/// outside `1e-4 ≤ |x| < 1e12`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..12).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp) as usize;
    strip_zeros(&format!("{x:.decimals$}")).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { s }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

fn record(row: &RateRow) -> [String; 10] {
    [
        format_number(row.snr_db),
        format_number(row.p_linear),
        row.scheme.tag().to_string(),
        row.capacity_spec.clone(),
        opt(row.rate_nats),
        opt(row.s_th),
        opt(row.u0),
        opt(row.u1),
        opt(row.lambda),
        row.status.to_string(),
    ]
}

pub fn write_rows<W: Write>(rows: &[RateRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[RateRow], path: &Path) -> Result<(), CsvError> {
    let p = || path.display().to_string();
    let file = std::fs::File::create(path).map_err(|source| CsvError::Io { path: p(), source })?;
    let mut buf = std::io::BufWriter::new(file);
    write_rows(rows, &mut buf).map_err(|source| CsvError::Csv { path: p(), source })?;
    buf.flush().map_err(|source| CsvError::Io { path: p(), source })
}

/// Reads a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<RateRow>, CsvError> {
    let p = || path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|source| CsvError::Csv { path: p(), source })?;
    let header = r.headers().map_err(|source| CsvError::Csv { path: p(), source })?.clone();
    if header.iter().ne(HEADER) {
        return Err(CsvError::Parse { path: p(), line: 1, detail: "unexpected header".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|source| CsvError::Csv { path: p(), source })?;
        let bad = |d: String| CsvError::Parse { path: p(), line, detail: d };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}")));
        let opt_num = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let scheme: Scheme = rec[2].parse().map_err(|e: ibcast_core::montecarlo::UnknownScheme| bad(e.to_string()))?;
        rows.push(RateRow {
            snr_db: num(&rec[0])?,
            p_linear: num(&rec[1])?,
            scheme,
            capacity_spec: rec[3].to_string(),
            rate_nats: opt_num(&rec[4])?,
            s_th: opt_num(&rec[5])?,
            u0: opt_num(&rec[6])?,
            u1: opt_num(&rec[7])?,
            lambda: opt_num(&rec[8])?,
            status: RowStatus::parse(&rec[9]),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(4.0), "4");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(1000.0), "1000");
        assert_eq!(format_number(10f64.powf(0.5)), "3.16227766017");
        assert_eq!(format_number(1.5e-5), "1.5e-05");
        assert_eq!(format_number(2.0e12), "2e+12");
        assert_eq!(format_number(-0.25), "-0.25");
        assert_eq!(format_number(0.0001), "0.0001");
        assert_eq!(format_number(999999999999.5), "1e+12");
    }

    #[test]
    fn header_only_for_no_rows() {
        let mut buf = Vec::new();
        write_rows(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "snr_db,p_linear,scheme,capacity_spec,rate_nats,s_th,u0,u1,lambda,status\n");
    }
}
