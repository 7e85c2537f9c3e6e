//! Executes a [`RunConfig`] and turns estimates into result rows.

use std::path::Path as FsPath;

use serde::Serialize;
use sha2::{Digest, Sha256};
use sfde_core::models::{ahmp_closed_path, ahmp_model};
use sfde_core::noise::generate_noise;
use sfde_core::{
    delta_batch, delta_fd, delta_index, direction_dictionary, m2_norm, run_paths, simulate, Direction, DirectionKind,
    Estimate, Grid, McParams, Model, Problem, Segment, Valuation,
};

use crate::config::{
    load_segment, parse_direction, DirectionSpec, EstimatorConfig, EtaConfig, ModeConfig, ModelConfig, RunConfig,
};
use crate::error::CliError;

/// One output line.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Row {
    pub direction_id: String,
    pub estimator: String,
    pub valuation: String,
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub h: f64,
    pub seed: u64,
    pub ci95: f64,
    pub model: String,
    pub mode: String,
    pub params_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_value: Option<f64>,
}

/// Row label for estimators that are not tied to a direction or valuation.
pub const NONE: &str = "none";

/// Short SHA-256 of the config as it was run (after command-line overrides).
pub fn params_hash(cfg: &RunConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.output = Default::default();
    let json = serde_json::to_string(&canonical).expect("config serializes");
    hex::encode(&Sha256::digest(json.as_bytes())[..8])
}

struct RowFactory<'a> {
    cfg: &'a RunConfig,
    hash: String,
}

impl RowFactory<'_> {
    fn row(&self, direction: &str, estimator: &str, valuation: &str, e: &Estimate) -> Row {
        Row {
            direction_id: direction.to_string(),
            estimator: estimator.to_string(),
            valuation: valuation.to_string(),
            mean: e.mean,
            stderr: e.stderr,
            n_paths: e.n_paths,
            h: self.cfg.grid.h,
            seed: self.cfg.mc.seed,
            ci95: e.ci95,
            model: self.cfg.model.name().to_string(),
            mode: self.cfg.run.mode.name().to_string(),
            params_hash: self.hash.clone(),
            sweep_value: None,
        }
    }
}

/// Expands the direction requests into unit (or file-given) input-space directions,
/// dropping repeated ids.
pub fn resolve_directions(
    cfg: &RunConfig,
    grid: &Grid<f64>,
    d: usize,
    base: &FsPath,
) -> Result<Vec<Direction<f64>>, CliError> {
    let mut out: Vec<Direction<f64>> = Vec::new();
    let canonical = direction_dictionary(DirectionKind::Canonical, d, grid.n_delay(), grid.step());
    for spec in &cfg.run.directions {
        let found = match parse_direction(spec)? {
            DirectionSpec::Family(kind) => direction_dictionary(kind, d, grid.n_delay(), grid.step()),
            DirectionSpec::Named(name) => {
                let v: Vec<_> = canonical.iter().filter(|c| c.id == name || c.id.starts_with(&format!("{name}_"))).cloned().collect();
                if v.is_empty() {
                    return Err(CliError::config("run.directions", format!("no direction `{name}`")));
                }
                v
            }
            DirectionSpec::File(p) => {
                let segment = load_segment(&base.join(&p), d, grid, "run.directions")?;
                vec![Direction { id: format!("file:{}", p.display()), segment }]
            }
        };
        for dir in found {
            if !out.iter().any(|o| o.id == dir.id) {
                out.push(dir);
            }
        }
    }
    Ok(out)
}

const ORDER: [Valuation; 3] = [Valuation::Plain, Valuation::RiskNeutral, Valuation::Benchmark];

/// Runs every requested estimator. `base` resolves relative file paths in the config.
pub fn execute(cfg: &RunConfig, base: &FsPath) -> Result<Vec<Row>, CliError> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let model = cfg.model.build(cfg.grid.r)?;
    let d_in = model.input_dim();
    let eta = cfg.eta.build(&grid, d_in, base)?;
    let problem = Problem::new(model.as_ref(), grid, eta, cfg.payoff.build())?;
    let params = McParams::new(cfg.mc.n_paths, cfg.mc.seed).with_stepping(cfg.mc.stepping.into());
    let opts = cfg.run.delta_options();
    let rows = RowFactory { cfg, hash: params_hash(cfg) };
    let estimators = &cfg.run.estimators;
    let listed: Vec<Valuation> = ORDER
        .into_iter()
        .filter(|v| cfg.run.valuations.iter().any(|&c| Valuation::from(c) == *v))
        .collect();
    let needs_dirs = estimators.iter().any(|e| {
        matches!(
            e,
            EstimatorConfig::DeltaPlain | EstimatorConfig::DeltaRn | EstimatorConfig::DeltaBenchmark | EstimatorConfig::DeltaFd
        )
    });
    let dirs = if needs_dirs { resolve_directions(cfg, &grid, d_in, base)? } else { Vec::new() };
    let mut out = Vec::new();

    // Malliavin estimators and prices share one ensemble.
    let wanted = |e: EstimatorConfig| estimators.contains(&e);
    let delta_vals: Vec<(EstimatorConfig, Valuation)> = [
        (EstimatorConfig::DeltaPlain, Valuation::Plain),
        (EstimatorConfig::DeltaRn, Valuation::RiskNeutral),
        (EstimatorConfig::DeltaBenchmark, Valuation::Benchmark),
    ]
    .into_iter()
    .filter(|(e, _)| wanted(*e))
    .collect();
    if wanted(EstimatorConfig::Price) || !delta_vals.is_empty() {
        let batch_vals: Vec<Valuation> = ORDER
            .into_iter()
            .filter(|v| {
                (wanted(EstimatorConfig::Price) && listed.contains(v)) || delta_vals.iter().any(|(_, dv)| dv == v)
            })
            .collect();
        let seg_dirs: Vec<&Segment<f64>> =
            if delta_vals.is_empty() { Vec::new() } else { dirs.iter().map(|d| &d.segment).collect() };
        let batch = delta_batch(&problem, &seg_dirs, &batch_vals, &params, &opts)?;
        if wanted(EstimatorConfig::Price) {
            for &v in &listed {
                out.push(rows.row(NONE, "price", v.name(), &batch.price(v).expect("priced")));
            }
        }
        for (i, dir) in dirs.iter().enumerate().take(seg_dirs.len()) {
            for (e, v) in &delta_vals {
                out.push(rows.row(&dir.id, e.name(), v.name(), &batch.delta(i, *v).expect("computed")));
            }
            if wanted(EstimatorConfig::DeltaPlain) {
                out.push(rows.row(&dir.id, "weight_mean", Valuation::Plain.name(), &batch.weight_means[i]));
            }
            if wanted(EstimatorConfig::DeltaRn) && cfg.run.mode == ModeConfig::PaperLiteral {
                out.push(rows.row(&dir.id, "rn_discrepancy", Valuation::RiskNeutral.name(), &batch.rn_discrepancy[i]));
            }
        }
    }

    if wanted(EstimatorConfig::DeltaFd) {
        let eps = cfg.run.fd_eps.unwrap_or_else(|| 1e-4 * m2_norm(&problem.eta.view()));
        for dir in &dirs {
            for &v in &listed {
                let fd = delta_fd(&problem, &dir.segment, eps, v, &params)?;
                out.push(rows.row(&dir.id, "delta_fd", v.name(), &fd.estimate));
            }
        }
    }

    if wanted(EstimatorConfig::DeltaIndex) {
        let basis = direction_dictionary(DirectionKind::GridBasis, d_in, grid.n_delay(), grid.step());
        for &v in &listed {
            let report = delta_index(&problem, v, &params, &opts, &basis)?;
            let e = Estimate {
                mean: report.index,
                stderr: report.index_error,
                n_paths: params.n_paths,
                ci95: 1.96 * report.index_error,
                rejected: report.values.iter().map(|x| x.rejected).max().unwrap_or(0),
            };
            out.push(rows.row("grid_basis", "delta_index", v.name(), &e));
        }
    }

    if wanted(EstimatorConfig::StrongError) {
        let e = strong_error(cfg, &grid, &problem.eta, &params)?;
        out.push(rows.row(NONE, "strong_error", NONE, &e));
    }
    Ok(out)
}

/// RMS relative error of the solver at `t = min(r, T)` against the closed form evaluated on
/// a finer grid driven by the same Brownian path.
fn strong_error(cfg: &RunConfig, grid: &Grid<f64>, eta: &Segment<f64>, params: &McParams) -> Result<Estimate, CliError> {
    let ModelConfig::Ahmp { mu, sigma, rate } = &cfg.model else {
        return Err(CliError::config("run.estimators", "strong_error needs the ahmp model"));
    };
    let model = ahmp_model(mu.build("model.mu")?, sigma.build("model.sigma")?, cfg.grid.r, rate.build("model.rate")?)?;
    let h = cfg.grid.h;
    let h_ref = cfg.run.reference_h.unwrap_or(h / 16.0);
    let factor = (h / h_ref).round() as usize;
    let fine = Grid::new(cfg.grid.r, cfg.grid.horizon, h_ref).map_err(|e| CliError::config("run.reference_h", e))?;
    if matches!(cfg.eta, EtaConfig::File { .. }) {
        return Err(CliError::config("eta.shape", "strong_error needs a closed-form initial segment"));
    }
    let eta_fine = cfg.eta.build(&fine, 1, FsPath::new(""))?;
    let t_end = cfg.grid.r.min(cfg.grid.horizon);
    let k = (t_end / h).round() as usize;
    let k_fine = k * factor;
    let est = run_paths(params.n_paths, 1, |p, out| {
        let noise_fine = generate_noise(params.seed, p, fine.n_steps(), 1, h_ref);
        let exact = ahmp_closed_path(&model, &eta_fine, &fine, &noise_fine, k_fine)?;
        let noise = noise_fine.coarsen(factor)?;
        let traj = simulate(&model as &dyn Model<f64>, &eta.view(), grid, &noise, params.stepping)?;
        let x = traj.path.at(k)[0];
        let rel = (x - exact[k_fine]) / exact[k_fine];
        out[0] = rel * rel;
        Ok(())
    })?;
    let ms = est[0];
    let rms = ms.mean.sqrt();
    let stderr = if rms > 0.0 { ms.stderr / (2.0 * rms) } else { 0.0 };
    Ok(Estimate { mean: rms, stderr, n_paths: ms.n_paths, ci95: 1.96 * stderr, rejected: ms.rejected })
}
