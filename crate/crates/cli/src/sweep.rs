//! Convergence studies: one full run per sweep point on a common master seed.

use std::path::Path as FsPath;
use std::str::FromStr;

use crate::config::{EstimatorConfig, RunConfig};
use crate::error::CliError;
use crate::runner::{execute, Row};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Vary {
    /// Step size `h`.
    H,
    /// Path count.
    Paths,
    /// Finite-difference step.
    Eps,
}

impl FromStr for Vary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "h" => Ok(Vary::H),
            "paths" => Ok(Vary::Paths),
            "eps" => Ok(Vary::Eps),
            _ => Err(format!("unknown sweep variable `{s}` (expected h, paths or eps)")),
        }
    }
}

/// The config of one sweep point.
pub fn apply(cfg: &RunConfig, vary: Vary, value: f64, all: &[f64]) -> Result<RunConfig, CliError> {
    let mut c = cfg.clone();
    match vary {
        Vary::H => {
            c.grid.h = value;
            // every point compares against the same reference Brownian paths
            if c.run.reference_h.is_none() && c.run.estimators.contains(&EstimatorConfig::StrongError) {
                let finest = all.iter().copied().fold(f64::INFINITY, f64::min);
                c.run.reference_h = Some(finest / 16.0);
            }
        }
        Vary::Paths => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(CliError::config("--values", format!("path count {value} is not a positive integer")));
            }
            c.mc.n_paths = value as usize;
        }
        Vary::Eps => c.run.fd_eps = Some(value),
    }
    c.validate()?;
    Ok(c)
}

/// Runs every sweep point; rows carry the point in `sweep_value`.
pub fn convergence_study(cfg: &RunConfig, vary: Vary, values: &[f64], base: &FsPath) -> Result<Vec<Row>, CliError> {
    if values.is_empty() {
        return Err(CliError::config("--values", "at least one sweep value is required"));
    }
    let mut rows = Vec::new();
    for &v in values {
        let point = apply(cfg, vary, v, values)?;
        for mut r in execute(&point, base)? {
            r.sweep_value = Some(v);
            rows.push(r);
        }
    }
    Ok(rows)
}

/// Log-log slopes between consecutive sweep points, per (estimator, direction,
/// valuation): of the mean for `h` sweeps (the observed order of `strong_error`),
/// of the standard error for path sweeps (≈ −½) and of the mean for `eps` sweeps.
pub fn slopes(rows: &[Row], vary: Vary) -> Vec<(String, Vec<f64>)> {
    let mut keys: Vec<(String, String, String)> = Vec::new();
    for r in rows {
        let k = (r.estimator.clone(), r.direction_id.clone(), r.valuation.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = Vec::new();
    for (e, d, v) in keys {
        if vary == Vary::H && e != "strong_error" {
            continue;
        }
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.estimator == e && r.direction_id == d && r.valuation == v)
            .map(|r| (r.sweep_value.unwrap_or(f64::NAN), if vary == Vary::Paths { r.stderr } else { r.mean.abs() }))
            .collect();
        let s: Vec<f64> = pts.windows(2).map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln()).collect();
        if !s.is_empty() {
            out.push((format!("{e} {d} {v}"), s));
        }
    }
    out
}
