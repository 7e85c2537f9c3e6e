//! Run configuration (TOML). Unknown keys are rejected everywhere.

use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use sfde_core::models::{ahmp_model, bs_model, kp_model, LinearFunctional};
use sfde_core::segment::parse_segment_table;
use sfde_core::{
    DeltaOptions, DirectionKind, Grid, InitialShape, Integrand, Model, Payoff, RnMode, Segment, Stepping, TimeFn,
    Valuation, WeightFn,
};

use crate::error::CliError;

/// Smallest path count accepted from a config file.
pub const MIN_PATHS: usize = 100;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub eta: EtaConfig,
    pub grid: GridConfig,
    pub mc: McConfig,
    pub payoff: PayoffConfig,
    #[serde(default)]
    pub run: JobConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A constant or a piecewise-constant function of time.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum TimeFnConfig {
    Constant(f64),
    Piecewise(PiecewiseConfig),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseConfig {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl Default for TimeFnConfig {
    fn default() -> Self {
        TimeFnConfig::Constant(0.0)
    }
}

impl TimeFnConfig {
    pub fn build(&self, key: &str) -> Result<TimeFn, CliError> {
        match self {
            TimeFnConfig::Constant(c) => Ok(TimeFn::Constant(*c)),
            TimeFnConfig::Piecewise(p) => TimeFn::piecewise(p.breaks.clone(), p.values.clone())
                .map_err(|e| CliError::config(key, e.to_string())),
        }
    }
}

/// `c0 + c_lag·S(t−r) + c_avg·mean(S over the window)`.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub lagged: f64,
    #[serde(default)]
    pub average: f64,
}

impl From<FunctionalConfig> for LinearFunctional {
    fn from(c: FunctionalConfig) -> Self {
        LinearFunctional { constant: c.constant, lagged: c.lagged, average: c.average }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `dS = μS dt + σS dW`.
    Bs {
        mu: f64,
        sigma: f64,
        #[serde(default)]
        rate: TimeFnConfig,
    },
    /// Delayed Ornstein–Uhlenbeck factor `Y` with `S = α₁exp(α₂Y + α₃t)`.
    Kp {
        alpha1: f64,
        alpha2: f64,
        alpha3: f64,
        mu: f64,
        sigma: f64,
        #[serde(default)]
        rate: TimeFnConfig,
    },
    /// `dS = μ(t)S(t−r)S dt + σ(t)S dW`.
    Ahmp {
        mu: TimeFnConfig,
        sigma: TimeFnConfig,
        #[serde(default)]
        rate: TimeFnConfig,
    },
    /// `dS = μ(S_t)S dt + σ(S_t)S dW` with linear functionals of the segment.
    CustomGeometric {
        mu: FunctionalConfig,
        sigma: FunctionalConfig,
        #[serde(default)]
        rate: TimeFnConfig,
    },
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Bs { .. } => "bs",
            ModelConfig::Kp { .. } => "kp",
            ModelConfig::Ahmp { .. } => "ahmp",
            ModelConfig::CustomGeometric { .. } => "custom-geometric",
        }
    }

    /// The model with delay `r` taken from the grid block.
    pub fn build(&self, r: f64) -> Result<Box<dyn Model<f64>>, CliError> {
        let wrap = |e: sfde_core::Error| CliError::config("model", e.to_string());
        Ok(match self {
            ModelConfig::Bs { mu, sigma, rate } => Box::new(bs_model(*mu, *sigma, rate.build("model.rate")?).map_err(wrap)?),
            ModelConfig::Kp { alpha1, alpha2, alpha3, mu, sigma, rate } => Box::new(
                kp_model(*alpha1, *alpha2, *alpha3, *mu, *sigma, r, rate.build("model.rate")?).map_err(wrap)?,
            ),
            ModelConfig::Ahmp { mu, sigma, rate } => Box::new(
                ahmp_model(mu.build("model.mu")?, sigma.build("model.sigma")?, r, rate.build("model.rate")?)
                    .map_err(wrap)?,
            ),
            ModelConfig::CustomGeometric { mu, sigma, rate } => Box::new(
                LinearFunctional::model::<f64>((*mu).into(), (*sigma).into(), r, rate.build("model.rate")?)
                    .map_err(wrap)?,
            ),
        })
    }
}

/// Initial segment, in the model's input space (`η_Y` for `kp`).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaConfig {
    Constant { value: f64 },
    Linear { at_zero: f64, slope: f64 },
    Sine { level: f64, amplitude: f64, frequency: f64 },
    /// Two-column table `time value` on the grid of `[-r, 0]`; relative paths resolve
    /// against the config file.
    File { path: PathBuf },
}

impl EtaConfig {
    pub fn build(&self, grid: &Grid<f64>, d: usize, base: &FsPath) -> Result<Segment<f64>, CliError> {
        let shape = match self {
            EtaConfig::Constant { value } => InitialShape::Constant(*value),
            EtaConfig::Linear { at_zero, slope } => InitialShape::Linear { at_zero: *at_zero, slope: *slope },
            EtaConfig::Sine { level, amplitude, frequency } => {
                InitialShape::Sine { level: *level, amplitude: *amplitude, frequency: *frequency }
            }
            EtaConfig::File { path } => return load_segment(&base.join(path), d, grid, "eta.path"),
        };
        if d != 1 {
            return Err(CliError::config("eta.shape", "closed-form shapes need a scalar input"));
        }
        Ok(shape.sample(grid))
    }
}

pub(crate) fn load_segment(path: &FsPath, d: usize, grid: &Grid<f64>, key: &str) -> Result<Segment<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(key, format!("cannot read {}: {e}", path.display())))?;
    parse_segment_table(&text, d, grid).map_err(|e| CliError::config(key, format!("{}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Delay `r`.
    pub r: f64,
    /// Horizon `T`.
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Step `h`; must divide both `r` and `T`.
    pub h: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid<f64>, CliError> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(CliError::config("grid.h", format!("step {} must be positive", self.h)));
        }
        if !(self.r >= 0.0) {
            return Err(CliError::config("grid.r", format!("delay {} must be non-negative", self.r)));
        }
        if !(self.horizon > 0.0) {
            return Err(CliError::config("grid.T", format!("horizon {} must be positive", self.horizon)));
        }
        for (key, value) in [("grid.r", self.r), ("grid.T", self.horizon)] {
            let n = value / self.h;
            if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                return Err(CliError::config("grid.h", format!("h = {} does not divide {key} = {value}", self.h)));
            }
        }
        Grid::new(self.r, self.horizon, self.h).map_err(|e| CliError::config("grid.h", e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SteppingConfig {
    Direct,
    #[default]
    LogEuler,
}

impl From<SteppingConfig> for Stepping {
    fn from(s: SteppingConfig) -> Self {
        match s {
            SteppingConfig::Direct => Stepping::Direct,
            SteppingConfig::LogEuler => Stepping::LogEuler,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    /// Master seed; there is no clock-based default.
    pub seed: u64,
    #[serde(default)]
    pub stepping: SteppingConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffConfig {
    EuropeanCall { strike: f64 },
    AsianCall { strike: f64, window: f64 },
    LookbackCall { strike: f64 },
    Terminal,
    Constant { value: f64 },
}

impl PayoffConfig {
    pub fn build(&self) -> Payoff {
        match *self {
            PayoffConfig::EuropeanCall { strike } => Payoff::EuropeanCall { strike },
            PayoffConfig::AsianCall { strike, window } => Payoff::AsianCall { strike, window },
            PayoffConfig::LookbackCall { strike } => Payoff::LookbackCall { strike },
            PayoffConfig::Terminal => Payoff::Terminal,
            PayoffConfig::Constant { value } => Payoff::Constant(value),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "snake_case")]
pub enum ValuationConfig {
    Plain,
    RiskNeutral,
    Benchmark,
}

impl From<ValuationConfig> for Valuation {
    fn from(v: ValuationConfig) -> Self {
        match v {
            ValuationConfig::Plain => Valuation::Plain,
            ValuationConfig::RiskNeutral => Valuation::RiskNeutral,
            ValuationConfig::Benchmark => Valuation::Benchmark,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorConfig {
    /// Price under every listed valuation.
    Price,
    DeltaPlain,
    DeltaRn,
    DeltaBenchmark,
    /// CRN central difference under every listed valuation.
    DeltaFd,
    /// Operator norm over the grid basis under every listed valuation.
    DeltaIndex,
    /// Solver vs closed form RMS relative error at `min(r, T)` (`ahmp` only).
    StrongError,
}

impl EstimatorConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorConfig::Price => "price",
            EstimatorConfig::DeltaPlain => "delta_plain",
            EstimatorConfig::DeltaRn => "delta_rn",
            EstimatorConfig::DeltaBenchmark => "delta_benchmark",
            EstimatorConfig::DeltaFd => "delta_fd",
            EstimatorConfig::DeltaIndex => "delta_index",
            EstimatorConfig::StrongError => "strong_error",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AFunctionConfig {
    #[default]
    Uniform,
    Linear,
    Early,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    #[default]
    Consistent,
    PaperLiteral,
}

impl ModeConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModeConfig::Consistent => "consistent",
            ModeConfig::PaperLiteral => "paper_literal",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum IntegrandConfig {
    #[default]
    Pinned,
    PointEvaluation,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default = "default_valuations")]
    pub valuations: Vec<ValuationConfig>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorConfig>,
    /// `canonical`, `grid_basis`, `fourier:K`, a canonical id (`point`, `constant`,
    /// `ramp`) or `file:PATH`.
    #[serde(default = "default_directions")]
    pub directions: Vec<String>,
    /// Finite-difference step; defaults to `1e-4·‖η‖`.
    #[serde(default)]
    pub fd_eps: Option<f64>,
    #[serde(default)]
    pub a_function: AFunctionConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub integrand: IntegrandConfig,
    /// Reference step of the closed form in `strong_error`; defaults to `h/16`.
    #[serde(default)]
    pub reference_h: Option<f64>,
}

fn default_valuations() -> Vec<ValuationConfig> {
    vec![ValuationConfig::Plain, ValuationConfig::RiskNeutral, ValuationConfig::Benchmark]
}
fn default_estimators() -> Vec<EstimatorConfig> {
    vec![EstimatorConfig::Price, EstimatorConfig::DeltaPlain, EstimatorConfig::DeltaRn, EstimatorConfig::DeltaBenchmark]
}
fn default_directions() -> Vec<String> {
    vec!["canonical".into()]
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            valuations: default_valuations(),
            estimators: default_estimators(),
            directions: default_directions(),
            fd_eps: None,
            a_function: AFunctionConfig::default(),
            mode: ModeConfig::default(),
            integrand: IntegrandConfig::default(),
            reference_h: None,
        }
    }
}

impl JobConfig {
    pub fn delta_options(&self) -> DeltaOptions {
        DeltaOptions {
            weight: match self.a_function {
                AFunctionConfig::Uniform => WeightFn::Uniform,
                AFunctionConfig::Linear => WeightFn::Linear,
                AFunctionConfig::Early => WeightFn::Early,
            },
            integrand: match self.integrand {
                IntegrandConfig::Pinned => Integrand::Pinned,
                IntegrandConfig::PointEvaluation => Integrand::PointEvaluation,
            },
            rn_mode: match self.mode {
                ModeConfig::Consistent => RnMode::Consistent,
                ModeConfig::PaperLiteral => RnMode::PaperLiteral,
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for `results.csv` / `results.json`, relative to the working directory.
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// File stem of the outputs.
    #[serde(default = "default_stem")]
    pub stem: String,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_stem() -> String {
    "results".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out(), stem: default_stem() }
    }
}

/// A parsed direction request.
#[derive(Clone, Debug, PartialEq)]
pub enum DirectionSpec {
    Family(DirectionKind),
    Named(String),
    File(PathBuf),
}

pub fn parse_direction(s: &str) -> Result<DirectionSpec, CliError> {
    let s = s.trim();
    Ok(match s {
        "canonical" => DirectionSpec::Family(DirectionKind::Canonical),
        "grid_basis" => DirectionSpec::Family(DirectionKind::GridBasis),
        "point" | "constant" | "ramp" => DirectionSpec::Named(s.to_string()),
        _ => {
            if let Some(k) = s.strip_prefix("fourier:") {
                let modes = k
                    .parse()
                    .map_err(|_| CliError::config("run.directions", format!("`{s}`: mode count must be an integer")))?;
                DirectionSpec::Family(DirectionKind::Fourier { modes })
            } else if let Some(p) = s.strip_prefix("file:") {
                DirectionSpec::File(PathBuf::from(p))
            } else {
                return Err(CliError::config("run.directions", format!("unknown direction `{s}`")));
            }
        }
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks that need no simulation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.build()?;
        if self.mc.n_paths < MIN_PATHS {
            return Err(CliError::config("mc.n_paths", format!("{} is below the minimum of {MIN_PATHS}", self.mc.n_paths)));
        }
        if self.run.valuations.is_empty() {
            return Err(CliError::config("run.valuations", "at least one valuation is required"));
        }
        if self.run.estimators.is_empty() {
            return Err(CliError::config("run.estimators", "at least one estimator is required"));
        }
        for d in &self.run.directions {
            parse_direction(d)?;
        }
        if let Some(eps) = self.run.fd_eps {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(CliError::config("run.fd_eps", "must be positive"));
            }
        }
        if let Some(h) = self.run.reference_h {
            let n = self.grid.h / h;
            if !(h > 0.0) || n < 1.0 - 1e-9 || (n - n.round()).abs() > 1e-9 * n {
                return Err(CliError::config("run.reference_h", "must divide grid.h"));
            }
        }
        if self.run.estimators.contains(&EstimatorConfig::StrongError) && !matches!(self.model, ModelConfig::Ahmp { .. }) {
            return Err(CliError::config("run.estimators", "strong_error needs the ahmp model"));
        }
        if self.output.stem.is_empty() || self.output.stem.contains(['/', '\\']) {
            return Err(CliError::config("output.stem", "must be a plain file name"));
        }
        Ok(())
    }
}
