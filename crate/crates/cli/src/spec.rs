//! Sweep specification: SNR grid, capacity specs, schemes and fading law.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ibcast_core::montecarlo::CapacityModel;
use ibcast_core::{CapacityDistribution, FadingDistribution, Rayleigh, Scheme};
use thiserror::Error;

use crate::csv_out::format_number;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArgError {
    #[error("invalid SNR list {0:?}: {1}")]
    Snr(String, String),
    #[error("invalid capacity {0:?}: {1}")]
    Capacity(String, String),
    #[error("{0}")]
    Scheme(String),
    #[error("unknown fading law {0:?} (supported: rayleigh)")]
    Fading(String),
    #[error("config file {path}: {detail}")]
    Config { path: String, detail: String },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FadingKind {
    #[default]
    Rayleigh,
}

impl FadingKind {
    pub fn parse(s: &str) -> Result<Self, ArgError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rayleigh" => Ok(FadingKind::Rayleigh),
            other => Err(ArgError::Fading(other.to_string())),
        }
    }

    pub fn distribution(self) -> Arc<dyn FadingDistribution> {
        match self {
            FadingKind::Rayleigh => Arc::new(Rayleigh),
        }
    }
}

/// A capacity as given on the command line, with its canonical CSV label.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySpec {
    pub label: String,
    pub model: CapacityModel,
}

impl CapacitySpec {
    pub fn parse(text: &str) -> Result<Self, ArgError> {
        let err = |d: &str| ArgError::Capacity(text.to_string(), d.to_string());
        let text = text.trim();
        if text.contains(':') {
            let mut atoms = Vec::new();
            for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                let (c, p) = part.split_once(':').ok_or_else(|| err("atoms are written C:p"))?;
                let c: f64 = c.trim().parse().map_err(|_| err("capacity is not a number"))?;
                let p: f64 = p.trim().parse().map_err(|_| err("probability is not a number"))?;
                atoms.push((c, p));
            }
            let dist = CapacityDistribution::new(atoms).map_err(|e| err(&e.to_string()))?;
            let label = dist
                .atoms()
                .iter()
                .map(|a| format!("{}:{}", format_number(a.capacity), format_number(a.probability)))
                .collect::<Vec<_>>()
                .join(";");
            Ok(Self { label, model: CapacityModel::Random(dist) })
        } else {
            let c: f64 = text.parse().map_err(|_| err("not a number"))?;
            if !(c >= 0.0) || !c.is_finite() {
                return Err(err("capacity must be finite and non-negative"));
            }
            Ok(Self { label: format_number(c), model: CapacityModel::Fixed(c) })
        }
    }
}

/// `a:b:step` (inclusive), a comma list, or a single value.
pub fn parse_snr_list(text: &str) -> Result<Vec<f64>, ArgError> {
    let err = |d: &str| ArgError::Snr(text.to_string(), d.to_string());
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err("not a number"));
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(err("ranges are written start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) {
            return Err(err("step must be positive"));
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if !(count >= 0.0) {
            return Err(err("stop is below start"));
        }
        (0..=count as usize).map(|i| start + step * i as f64).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(err("empty list"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(err("values must be finite"));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(err("values must be strictly increasing"));
    }
    Ok(values)
}

/// `all`, or a comma list of scheme tags. Returned in canonical order.
pub fn parse_schemes(text: &str) -> Result<Vec<Scheme>, ArgError> {
    if text.trim() == "all" {
        return Ok(Scheme::ALL.to_vec());
    }
    let mut out = Vec::new();
    for tag in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let s: Scheme = tag.parse().map_err(|e: ibcast_core::montecarlo::UnknownScheme| ArgError::Scheme(e.to_string()))?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err(ArgError::Scheme("no schemes given".into()));
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub snr_db: Vec<f64>,
    pub capacities: Vec<CapacitySpec>,
    pub schemes: Vec<Scheme>,
    pub fading: FadingKind,
    pub output: Option<PathBuf>,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Flat `key = value` file; `#` starts a comment. Keys may repeat
/// (`capacity`), later values of other keys win.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, Vec<String>>, ArgError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ArgError::Config { path: path.display().to_string(), detail: e.to_string() })?;
    parse_config(&text).map_err(|detail| ArgError::Config { path: path.display().to_string(), detail })
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, Vec<String>>, String> {
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        let key = k.trim().replace('_', "-");
        const KEYS: [&str; 7] = ["snr-db", "capacity", "schemes", "fading", "out", "samples", "seed"];
        if !KEYS.contains(&key.as_str()) {
            return Err(format!("line {}: unknown key {key:?}", n + 1));
        }
        map.entry(key).or_default().push(v.trim().to_string());
    }
    Ok(map)
}
