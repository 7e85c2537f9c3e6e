//! CSV (canonical), JSON mirror and the terminal table.

use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::runner::{params_hash, Row};

/// Fixed leading columns; sweep output appends `sweep_value`.
pub const COLUMNS: [&str; 12] = [
    "direction_id",
    "estimator",
    "valuation",
    "mean",
    "stderr",
    "n_paths",
    "h",
    "seed",
    "ci95",
    "model",
    "mode",
    "params_hash",
];

/// CSV text of `rows`. Floats use the shortest round-trip representation, so equal
/// results give byte-identical files.
pub fn to_csv(rows: &[Row], sweep: bool) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if sweep {
        header.push("sweep_value");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.direction_id.clone(),
            r.estimator.clone(),
            r.valuation.clone(),
            r.mean.to_string(),
            r.stderr.to_string(),
            r.n_paths.to_string(),
            r.h.to_string(),
            r.seed.to_string(),
            r.ci95.to_string(),
            r.model.clone(),
            r.mode.clone(),
            r.params_hash.clone(),
        ];
        if sweep {
            rec.push(r.sweep_value.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct Metadata<'a> {
    model: &'a str,
    params_hash: String,
    /// The M₂ inner product weights the present value and the history equally.
    m2_weighting: &'static str,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Document<'a> {
    metadata: Metadata<'a>,
    rows: &'a [Row],
}

pub fn to_json(cfg: &RunConfig, rows: &[Row]) -> Result<String, CliError> {
    let doc = Document {
        metadata: Metadata { model: cfg.model.name(), params_hash: params_hash(cfg), m2_weighting: "equal", config: cfg },
        rows,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`; returns the CSV path.
pub fn write_results(cfg: &RunConfig, rows: &[Row], dir: &FsPath, stem: &str, sweep: bool) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    std::fs::write(&csv_path, to_csv(rows, sweep)?)?;
    std::fs::write(dir.join(format!("{stem}.json")), to_json(cfg, rows)?)?;
    Ok(csv_path)
}

/// Human-readable `mean ± ci95` table.
pub fn print_table(out: &mut impl Write, rows: &[Row], sweep: bool) -> std::io::Result<()> {
    let id_w = rows.iter().map(|r| r.direction_id.len()).max().unwrap_or(0).max(9);
    if sweep {
        write!(out, "{:>12}  ", "sweep")?;
    }
    writeln!(out, "{:<16} {:<id_w$} {:<13} {:>28}  {:>8}", "estimator", "direction", "valuation", "mean ± ci95", "paths")?;
    for r in rows {
        if sweep {
            write!(out, "{:>12}  ", r.sweep_value.map(|v| format!("{v:.6e}")).unwrap_or_default())?;
        }
        writeln!(
            out,
            "{:<16} {:<id_w$} {:<13} {:>14.6e} ± {:<11.3e}  {:>8}",
            r.estimator, r.direction_id, r.valuation, r.mean, r.ci95, r.n_paths
        )?;
    }
    Ok(())
}
