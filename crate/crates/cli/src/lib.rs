//! Config-driven runner for the `sfde` command: parses a TOML run description,
//! executes pricing and delta estimators on a worker pool and writes CSV/JSON results.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod sweep;

use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

pub use config::RunConfig;
pub use error::CliError;
pub use runner::{execute, Row};
pub use sweep::{convergence_study, Vary};

/// Environment variable selecting the worker count.
pub const WORKERS_ENV: &str = "SFDE_WORKERS";

/// Command-line overrides of a config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub out: Option<PathBuf>,
    pub mode: Option<config::ModeConfig>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(s) = self.seed {
            cfg.mc.seed = s;
        }
        if let Some(n) = self.n_paths {
            cfg.mc.n_paths = n;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(m) = self.mode {
            cfg.run.mode = m;
        }
        cfg.validate()
    }
}

/// Worker pool sized by [`WORKERS_ENV`] (all cores when unset).
pub fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let n = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} = `{v}` is not a positive integer")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn load(config_path: &FsPath, overrides: &Overrides) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = RunConfig::load(config_path)?;
    overrides.apply(&mut cfg)?;
    let base = config_path.parent().map(FsPath::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

/// `run <config>`: executes and writes `<out>/<stem>.{csv,json}`.
pub fn run(config_path: &FsPath, overrides: &Overrides, out: &mut impl Write) -> Result<Vec<Row>, CliError> {
    let (cfg, base) = load(config_path, overrides)?;
    let rows = worker_pool()?.install(|| execute(&cfg, &base))?;
    output::print_table(out, &rows, false)?;
    let path = output::write_results(&cfg, &rows, &cfg.output.dir, &cfg.output.stem, false)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(rows)
}

/// `sweep <config> --vary … --values …`: writes `<out>/<stem>_sweep.{csv,json}`.
pub fn sweep(
    config_path: &FsPath,
    overrides: &Overrides,
    vary: Vary,
    values: &[f64],
    out: &mut impl Write,
) -> Result<Vec<Row>, CliError> {
    let (cfg, base) = load(config_path, overrides)?;
    let rows = worker_pool()?.install(|| convergence_study(&cfg, vary, values, &base))?;
    output::print_table(out, &rows, true)?;
    for (key, s) in sweep::slopes(&rows, vary) {
        let what = match vary {
            Vary::H => "observed order",
            Vary::Paths => "stderr slope in n",
            Vary::Eps => "log-log slope in eps",
        };
        let list: Vec<String> = s.iter().map(|x| format!("{x:.3}")).collect();
        writeln!(out, "{key}: {what} {}", list.join(" "))?;
    }
    let stem = format!("{}_sweep", cfg.output.stem);
    let path = output::write_results(&cfg, &rows, &cfg.output.dir, &stem, true)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(rows)
}
