//! Prices and Malliavin-weight deltas with respect to the initial segment.
//!
//! Per path, the delta along `ψ` is `Φ(S_T)·w(ψ)` where the weight is built from an
//! adapted integrand `u_k` with `Σ_k h·𝒟_k x_T·u_k = DX_T(η)(ψ)`:
//!
//! * plain: `w = Σ u_k ΔW_k`;
//! * risk-neutral: `(M/B)[D log M(ψ) + Σ u_k ΔW_k − h Σ u_k 𝒟_k log M]`;
//! * benchmark: `(1/G)[Σ u_k ΔW_k + h Σ u_k 𝒟_k log G − D log G(ψ)]`.
//!
//! The Malliavin derivatives `𝒟_k log M`, `𝒟_k log G` come from the tangent columns of
//! the Euler recursion and are skipped when the market price of risk is state-free.

use crate::engine::{simulate, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::mc::{run_paths, Estimate, McParams};
use crate::measures::{dtheta_of, simulate_measures, MeasurePath};
use crate::model::Model;
use crate::noise::{generate_noise, Noise};
use crate::payoff::Payoff;
use crate::scalar::Real;
use crate::segment::{check_orthonormal, m2_norm, Direction, Grid, Path, Segment};
use crate::variation::{noise_jacobian, Linearized};

/// Numéraire / measure under which the option is valued.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Valuation {
    /// `E[Φ]`.
    Plain,
    /// `E[M(T)Φ]/B(T)`.
    RiskNeutral,
    /// `E[Φ/G(T)]`.
    Benchmark,
}

impl Valuation {
    pub fn name(&self) -> &'static str {
        match self {
            Valuation::Plain => "plain",
            Valuation::RiskNeutral => "risk_neutral",
            Valuation::Benchmark => "benchmark",
        }
    }
}

/// Risk-neutral weight formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RnMode {
    /// Product rule with the Skorokhod integration-by-parts correction.
    #[default]
    Consistent,
    /// `(M/B)[D log M(ψ) + M·w_plain(ψ)]`, the weight written without the trace term.
    PaperLiteral,
}

impl RnMode {
    pub fn name(&self) -> &'static str {
        match self {
            RnMode::Consistent => "consistent",
            RnMode::PaperLiteral => "paper_literal",
        }
    }
}

/// Time profile `a(t)` of the weight, normalized so that `Σ a(t_k)h = 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightFn {
    /// `a ≡ 1/T`.
    #[default]
    Uniform,
    /// `a(t) = 2t/T²` (evaluated at step midpoints).
    Linear,
    /// `a ≡ 1/(T − r)` on `[0, T − r)`, zero afterwards.
    Early,
}

/// How the integrand `u_k` is obtained from the direction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Integrand {
    /// `u_k = a_k g⁻¹ γ_k / R_k`, where `γ` follows the variation recursion but has the
    /// share already transferred to the noise removed from its present value before
    /// each step (`R_k = h Σ_{j≥k} a_j`). Unbiased when the coefficients depend on
    /// the history of the segment.
    #[default]
    Pinned,
    /// `u_k = a_k g⁻¹ α^ψ(t_k)`. Exact for coefficients depending on the present value
    /// only; ignores the propagation of history perturbations otherwise.
    PointEvaluation,
}

/// Options of the weight construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DeltaOptions {
    pub weight: WeightFn,
    pub integrand: Integrand,
    pub rn_mode: RnMode,
}

/// Discretized weight profile on the step grid.
#[derive(Clone, Debug)]
pub struct WeightProfile<T> {
    /// `a_k`, with `h Σ a_k = 1`.
    pub a: Vec<T>,
    /// Share of the remaining mass transferred at step `k`: `h a_k / R_k`.
    pub pin: Vec<T>,
}

impl<T: Real> WeightProfile<T> {
    pub fn new(kind: WeightFn, grid: &Grid<T>) -> Result<Self> {
        let n = grid.n_steps();
        let h = grid.step();
        let raw: Vec<T> = match kind {
            WeightFn::Uniform => vec![T::one(); n],
            WeightFn::Linear => (0..n).map(|k| T::from_usize_lossy(2 * k + 1)).collect(),
            WeightFn::Early => {
                if grid.n_delay() >= n {
                    return Err(invalid("a_function", "early weight needs T > r"));
                }
                (0..n).map(|k| if k + grid.n_delay() < n { T::one() } else { T::zero() }).collect()
            }
        };
        let total = raw.iter().fold(T::zero(), |s, &x| s + x) * h;
        let a: Vec<T> = raw.iter().map(|&x| x / total).collect();
        let mut rem = vec![T::zero(); n + 1];
        for k in (0..n).rev() {
            rem[k] = rem[k + 1] + h * a[k];
        }
        let pin = (0..n).map(|k| if rem[k] > T::zero() { h * a[k] / rem[k] } else { T::one() }).collect();
        Ok(Self { a, pin })
    }
}

/// Per-path ingredients of the three weights along one direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathWeights<T> {
    /// `Σ u_k ΔW_k`.
    pub ito: T,
    /// `D log M(T)(ψ)`.
    pub dlog_m: T,
    /// `h Σ u_k 𝒟_k log M(T)`.
    pub trace_m: T,
    /// `h Σ u_k 𝒟_k log G(T)`.
    pub trace_g: T,
}

/// Everything one path contributes.
#[derive(Clone, Debug)]
pub struct PathSample<T> {
    pub payoff: T,
    pub density: T,
    pub gop: T,
    pub bond: T,
    pub weights: Vec<PathWeights<T>>,
}

impl<T: Real> PathSample<T> {
    /// Multiplier of `Φ` in the valuation's price.
    pub fn discount(&self, valuation: Valuation) -> T {
        match valuation {
            Valuation::Plain => T::one(),
            Valuation::RiskNeutral => self.density / self.bond,
            Valuation::Benchmark => T::one() / self.gop,
        }
    }

    /// Weight multiplying `Φ` in the delta estimator for direction `i`.
    pub fn weight(&self, i: usize, valuation: Valuation, mode: RnMode) -> T {
        let w = &self.weights[i];
        match (valuation, mode) {
            (Valuation::Plain, _) => w.ito,
            (Valuation::RiskNeutral, RnMode::Consistent) => {
                self.density / self.bond * (w.dlog_m + w.ito - w.trace_m)
            }
            (Valuation::RiskNeutral, RnMode::PaperLiteral) => {
                self.density / self.bond * (w.dlog_m + self.density * w.ito)
            }
            (Valuation::Benchmark, _) => (w.ito + w.trace_g + w.dlog_m) / self.gop,
        }
    }
}

/// Terminal segment of the traded asset as a scalar segment.
pub fn asset_segment<T: Real>(path: &Path<T>, k: usize, asset: usize) -> Segment<T> {
    let seg = path.segment(k);
    let d = seg.dim();
    if d == 1 {
        return seg.to_owned();
    }
    let data = seg.data().iter().skip(asset).step_by(d).copied().collect();
    Segment::from_raw(data, 1, seg.n_delay(), seg.step())
}

fn inverse_diffusions<T: Real, M: Model<T> + ?Sized>(model: &M, traj: &Trajectory<T>) -> Result<Vec<T>> {
    let (d, m) = (traj.dim(), traj.noise_dim());
    let n = traj.grid().n_steps();
    let mut out = vec![T::zero(); n * m * d];
    for k in 0..n {
        let t = traj.grid().time(k);
        model.right_inverse(t, traj.path.segment(k), traj.diffusion(k), &mut out[k * m * d..(k + 1) * m * d])?;
        if out[k * m * d..(k + 1) * m * d].iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularVolatility { time: t.as_f64() });
        }
    }
    Ok(out)
}

/// `c_k = Σ_{j>k} (θ_j h + ΔW_j)·𝒟_kθ_j`, so that `𝒟_k log M = −θ_k − c_k` and `𝒟_k log G = θ_k + c_k`.
pub fn theta_trace<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    traj: &Trajectory<T>,
    noise: &Noise<T>,
    theta: &[T],
) -> Result<Vec<T>> {
    let grid = *traj.grid();
    let (n, d, h) = (grid.n_steps(), traj.dim(), grid.step());
    let a = model.asset();
    let zero = Segment::zeros(d, grid.n_delay(), h);
    let mut lin = Linearized::new(model, traj, noise);
    let mut c = vec![T::zero(); n];
    for k in 0..n.saturating_sub(1) {
        let mut col = Path::with_initial(grid, k + 1, &zero.view())?;
        let jac = noise_jacobian(model, traj, k);
        col.at_mut(k + 1).copy_from_slice(&jac);
        let mut acc = T::zero();
        for j in k + 1..n {
            lin.step(j, &mut col)?;
            let dth = dtheta_of(theta[j], traj.sigma(j)[a], lin.dmu[a], lin.dsigma[a]);
            acc += (theta[j] * h + noise.dw(j)[0]) * dth;
        }
        c[k] = acc;
    }
    Ok(c)
}

/// Simulates one path and evaluates payoff, numéraires and weight ingredients for
/// every state-space direction in `dirs`.
#[allow(clippy::too_many_arguments)]
pub fn sample_path<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    grid: &Grid<T>,
    state: &Segment<T>,
    dirs: &[Segment<T>],
    payoff: &Payoff,
    noise: &Noise<T>,
    params: &McParams,
    opts: &DeltaOptions,
    profile: &WeightProfile<T>,
    with_measures: bool,
) -> Result<PathSample<T>> {
    let traj = simulate(model, &state.view(), grid, noise, params.stepping)?;
    let n = grid.n_steps();
    let (d, m) = (model.dim(), model.noise_dim());
    let h = grid.step();
    let a_idx = model.asset();
    let phi = payoff.eval(asset_segment(&traj.path, n, a_idx).view());
    let (meas, trace): (Option<MeasurePath<T>>, Vec<T>) = if with_measures {
        let meas = simulate_measures(model, &traj, noise)?;
        // the trace only enters the weights
        let c = if model.theta_state_independent() || dirs.is_empty() {
            vec![T::zero(); n]
        } else {
            theta_trace(model, &traj, noise, &meas.theta)?
        };
        (Some(meas), c)
    } else {
        (None, Vec::new())
    };
    let need_alpha = opts.integrand == Integrand::PointEvaluation || (with_measures && !model.theta_state_independent());
    let ginv = if dirs.is_empty() { Vec::new() } else { inverse_diffusions(model, &traj)? };
    let mut lin = Linearized::new(model, &traj, noise);
    let mut weights = Vec::with_capacity(dirs.len());
    let mut u = vec![T::zero(); n * m];
    let mut q = vec![T::zero(); m];
    for psi in dirs {
        if psi.dim() != d {
            return Err(Error::GridMismatch("direction is not a state-space segment".into()));
        }
        let mut w = PathWeights { ito: T::zero(), dlog_m: T::zero(), trace_m: T::zero(), trace_g: T::zero() };
        // true variation: D log M(ψ) and, for the point-evaluation integrand, u_k
        if need_alpha {
            let mut alpha = Path::with_initial(*grid, 0, &psi.view())?;
            let mut dlog_m = T::zero();
            for k in 0..n {
                if opts.integrand == Integrand::PointEvaluation {
                    let x = alpha.at(k);
                    for l in 0..m {
                        let gi = &ginv[(k * m + l) * d..(k * m + l + 1) * d];
                        u[k * m + l] = profile.a[k] * gi.iter().zip(x).fold(T::zero(), |s, (&g, &v)| s + g * v);
                    }
                }
                lin.step(k, &mut alpha)?;
                if let Some(meas) = &meas {
                    let th = meas.theta[k];
                    let dth = dtheta_of(th, traj.sigma(k)[a_idx], lin.dmu[a_idx], lin.dsigma[a_idx]);
                    dlog_m -= th * dth * h + dth * noise.dw(k)[0];
                }
            }
            w.dlog_m = dlog_m;
        }
        if opts.integrand == Integrand::Pinned {
            let mut gamma = Path::with_initial(*grid, 0, &psi.view())?;
            for k in 0..n {
                let g = traj.diffusion(k);
                let pin = profile.pin[k];
                {
                    let x = gamma.at(k);
                    for l in 0..m {
                        let gi = &ginv[(k * m + l) * d..(k * m + l + 1) * d];
                        q[l] = gi.iter().zip(x).fold(T::zero(), |s, (&g, &v)| s + g * v);
                        u[k * m + l] = pin * q[l] / h;
                    }
                }
                let x = gamma.at_mut(k);
                for i in 0..d {
                    let gq = (0..m).fold(T::zero(), |s, l| s + g[i * m + l] * q[l]);
                    x[i] -= pin * gq;
                }
                lin.step(k, &mut gamma)?;
            }
        }
        for k in 0..n {
            let dw = noise.dw(k);
            for l in 0..m {
                w.ito += u[k * m + l] * dw[l];
            }
        }
        if let Some(meas) = &meas {
            for k in 0..n {
                let dm = -meas.theta[k] - trace[k];
                w.trace_m += u[k] * dm * h;
            }
            w.trace_g = -w.trace_m;
        }
        weights.push(w);
    }
    let (density, gop, bond) = match &meas {
        Some(m) => (m.density(), m.gop(), m.bond()),
        None => (T::one(), T::one(), T::one()),
    };
    Ok(PathSample { payoff: phi, density, gop, bond, weights })
}

/// A fully specified pricing problem.
pub struct Problem<'a, T, M: ?Sized> {
    pub model: &'a M,
    pub grid: Grid<T>,
    /// User-facing initial segment (dimension `model.input_dim()`).
    pub eta: Segment<T>,
    pub payoff: Payoff,
}

impl<'a, T: Real, M: Model<T> + ?Sized> Problem<'a, T, M> {
    pub fn new(model: &'a M, grid: Grid<T>, eta: Segment<T>, payoff: Payoff) -> Result<Self> {
        crate::model::check_model_grid(model, &grid)?;
        if eta.dim() != model.input_dim() || eta.n_delay() != grid.n_delay() {
            return Err(Error::GridMismatch(format!(
                "initial segment (d={}, n_r={}) does not match model input dimension {} and grid n_r={}",
                eta.dim(),
                eta.n_delay(),
                model.input_dim(),
                grid.n_delay()
            )));
        }
        payoff.validate(&grid)?;
        Ok(Self { model, grid, eta, payoff })
    }

    pub fn state(&self) -> Result<Segment<T>> {
        self.model.embed(&self.eta)
    }

    fn state_directions(&self, dirs: &[&Segment<T>]) -> Result<Vec<Segment<T>>> {
        dirs.iter()
            .map(|psi| {
                if !psi.same_shape(&self.eta) {
                    return Err(Error::GridMismatch("direction shape differs from the initial segment".into()));
                }
                self.model.embed_direction(&self.eta, psi)
            })
            .collect()
    }

    fn noise(&self, params: &McParams, path: u64) -> Noise<T> {
        generate_noise(params.seed, path, self.grid.n_steps(), self.model.noise_dim(), self.grid.step())
    }
}

/// Prices under every valuation and deltas for every (direction, valuation) pair from
/// one path ensemble.
#[derive(Clone, Debug)]
pub struct DeltaBatch {
    pub prices: Vec<(Valuation, Estimate)>,
    /// `deltas[i][v]` for direction `i` and `valuations[v]`.
    pub deltas: Vec<Vec<Estimate>>,
    /// `E[Σ u_k ΔW_k]` per direction; zero in expectation.
    pub weight_means: Vec<Estimate>,
    /// Paired `E[Φ(w_literal − w_consistent)]` per direction when the risk-neutral
    /// valuation is requested; empty otherwise.
    pub rn_discrepancy: Vec<Estimate>,
    pub valuations: Vec<Valuation>,
}

impl DeltaBatch {
    pub fn delta(&self, dir: usize, valuation: Valuation) -> Option<Estimate> {
        let v = self.valuations.iter().position(|&x| x == valuation)?;
        Some(self.deltas[dir][v])
    }
    pub fn price(&self, valuation: Valuation) -> Option<Estimate> {
        self.prices.iter().find(|(v, _)| *v == valuation).map(|(_, e)| *e)
    }
}

/// Runs the batch over input-space directions `dirs`.
pub fn delta_batch<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    dirs: &[&Segment<T>],
    valuations: &[Valuation],
    params: &McParams,
    opts: &DeltaOptions,
) -> Result<DeltaBatch> {
    params.validate()?;
    let state = problem.state()?;
    let sdirs = problem.state_directions(dirs)?;
    let profile = WeightProfile::new(opts.weight, &problem.grid)?;
    let with_measures = valuations.iter().any(|&v| v != Valuation::Plain);
    let nv = valuations.len();
    let with_rn = valuations.contains(&Valuation::RiskNeutral);
    let per_dir = nv + 1 + usize::from(with_rn);
    let width = nv + sdirs.len() * per_dir;
    let est = run_paths(params.n_paths, width, |p, out| {
        let noise = problem.noise(params, p);
        let s = sample_path(
            problem.model,
            &problem.grid,
            &state,
            &sdirs,
            &problem.payoff,
            &noise,
            params,
            opts,
            &profile,
            with_measures,
        )?;
        for (v, &val) in valuations.iter().enumerate() {
            out[v] = (s.payoff * s.discount(val)).as_f64();
        }
        for i in 0..sdirs.len() {
            let base = nv + i * per_dir;
            for (v, &val) in valuations.iter().enumerate() {
                out[base + v] = (s.payoff * s.weight(i, val, opts.rn_mode)).as_f64();
            }
            out[base + nv] = s.weights[i].ito.as_f64();
            if with_rn {
                let lit = s.weight(i, Valuation::RiskNeutral, RnMode::PaperLiteral);
                let con = s.weight(i, Valuation::RiskNeutral, RnMode::Consistent);
                out[base + nv + 1] = (s.payoff * (lit - con)).as_f64();
            }
        }
        Ok(())
    })?;
    let prices = valuations.iter().zip(&est).map(|(&v, &e)| (v, e)).collect();
    let mut deltas = Vec::with_capacity(sdirs.len());
    let mut weight_means = Vec::with_capacity(sdirs.len());
    let mut rn_discrepancy = Vec::new();
    for i in 0..sdirs.len() {
        let base = nv + i * per_dir;
        deltas.push(est[base..base + nv].to_vec());
        weight_means.push(est[base + nv]);
        if with_rn {
            rn_discrepancy.push(est[base + nv + 1]);
        }
    }
    Ok(DeltaBatch { prices, deltas, weight_means, rn_discrepancy, valuations: valuations.to_vec() })
}

/// `price`: Monte Carlo price under one valuation.
pub fn price<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    valuation: Valuation,
    params: &McParams,
) -> Result<Estimate> {
    let b = delta_batch(problem, &[], &[valuation], params, &DeltaOptions::default())?;
    Ok(b.prices[0].1)
}

fn single_delta<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    psi: &Segment<T>,
    valuation: Valuation,
    params: &McParams,
    opts: &DeltaOptions,
) -> Result<Estimate> {
    let b = delta_batch(problem, &[psi], &[valuation], params, opts)?;
    Ok(b.deltas[0][0])
}

/// `delta_plain`: `E[Φ·Σ u_k ΔW_k]`.
pub fn delta_plain<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    psi: &Segment<T>,
    params: &McParams,
    opts: &DeltaOptions,
) -> Result<Estimate> {
    single_delta(problem, psi, Valuation::Plain, params, opts)
}

/// `delta_risk_neutral` in the mode selected by `opts.rn_mode`.
pub fn delta_risk_neutral<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    psi: &Segment<T>,
    params: &McParams,
    opts: &DeltaOptions,
) -> Result<Estimate> {
    single_delta(problem, psi, Valuation::RiskNeutral, params, opts)
}

/// `delta_benchmark`.
pub fn delta_benchmark<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    psi: &Segment<T>,
    params: &McParams,
    opts: &DeltaOptions,
) -> Result<Estimate> {
    single_delta(problem, psi, Valuation::Benchmark, params, opts)
}

/// Central finite difference with common random numbers.
#[derive(Clone, Copy, Debug)]
pub struct FdEstimate {
    pub estimate: Estimate,
    /// Rounding floor `ε_mach·E|Φ·discount| / ε` of the per-path difference quotient.
    pub noise_floor: f64,
}

/// Finite differences at `ε` and `2ε` on the same paths.
#[derive(Clone, Copy, Debug)]
pub struct FdSweep {
    pub fd: FdEstimate,
    pub fd_double: Estimate,
    /// Paired `fd(2ε) − fd(ε)`.
    pub difference: Estimate,
    /// `C` in the bias model `fd(ε) − Dp(η)(ψ) ≈ Cε²`, from `fd(2ε) − fd(ε) ≈ 3Cε²`.
    pub c: f64,
}

fn bumped_values<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    state: &Segment<T>,
    noise: &Noise<T>,
    valuation: Valuation,
    params: &McParams,
) -> Result<T> {
    let model = problem.model;
    let traj = simulate(model, &state.view(), &problem.grid, noise, params.stepping)?;
    let n = problem.grid.n_steps();
    let phi = problem.payoff.eval(asset_segment(&traj.path, n, model.asset()).view());
    Ok(match valuation {
        Valuation::Plain => phi,
        Valuation::RiskNeutral => {
            let m = simulate_measures(model, &traj, noise)?;
            phi * m.density() / m.bond()
        }
        Valuation::Benchmark => {
            let m = simulate_measures(model, &traj, noise)?;
            phi / m.gop()
        }
    })
}

fn fd_states<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    psi: &Segment<T>,
    eps: T,
) -> Result<(Segment<T>, Segment<T>)> {
    if !(eps > T::zero()) {
        return Err(invalid("fd_eps", "must be positive"));
    }
    let up = problem.model.embed(&problem.eta.add_scaled(psi, eps)?)?;
    let dn = problem.model.embed(&problem.eta.add_scaled(psi, -eps)?)?;
    Ok((up, dn))
}

/// `delta_fd`: `(p(η+εψ) − p(η−εψ))/(2ε)` with per-path differencing; measures are
/// re-simulated with the bumped paths.
pub fn delta_fd<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    psi: &Segment<T>,
    eps: T,
    valuation: Valuation,
    params: &McParams,
) -> Result<FdEstimate> {
    Ok(fd_sweep_inner(problem, psi, eps, valuation, params, false)?.fd)
}

/// `delta_fd` at `ε` and `2ε` on common noise, with the Richardson estimate of the bias constant.
pub fn fd_sweep<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    psi: &Segment<T>,
    eps: T,
    valuation: Valuation,
    params: &McParams,
) -> Result<FdSweep> {
    fd_sweep_inner(problem, psi, eps, valuation, params, true)
}

fn fd_sweep_inner<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    psi: &Segment<T>,
    eps: T,
    valuation: Valuation,
    params: &McParams,
    double: bool,
) -> Result<FdSweep> {
    params.validate()?;
    if !psi.same_shape(&problem.eta) {
        return Err(Error::GridMismatch("direction shape differs from the initial segment".into()));
    }
    let (up, dn) = fd_states(problem, psi, eps)?;
    let (up2, dn2) = if double { fd_states(problem, psi, eps + eps)? } else { (up.clone(), dn.clone()) };
    let two_eps = eps + eps;
    let est = run_paths(params.n_paths, 4, |p, out| {
        let noise = problem.noise(params, p);
        let vu = bumped_values(problem, &up, &noise, valuation, params)?;
        let vd = bumped_values(problem, &dn, &noise, valuation, params)?;
        let fd = ((vu - vd) / two_eps).as_f64();
        out[0] = fd;
        out[1] = vu.abs().max(vd.abs()).as_f64();
        if double {
            let vu2 = bumped_values(problem, &up2, &noise, valuation, params)?;
            let vd2 = bumped_values(problem, &dn2, &noise, valuation, params)?;
            let fd2 = ((vu2 - vd2) / (two_eps + two_eps)).as_f64();
            out[2] = fd2;
            out[3] = fd2 - fd;
        } else {
            out[2] = 0.0;
            out[3] = 0.0;
        }
        Ok(())
    })?;
    let noise_floor = T::epsilon().as_f64() * est[1].mean / eps.as_f64();
    let fd = FdEstimate { estimate: est[0], noise_floor };
    if noise_floor > 0.1 * est[0].stderr.max(est[0].mean.abs() * 1e-3) {
        log::warn!(
            "finite-difference step {} is small: rounding floor {noise_floor:.3e} vs stderr {:.3e}",
            eps.as_f64(),
            est[0].stderr
        );
    }
    let e2 = eps.as_f64() * eps.as_f64();
    Ok(FdSweep { fd, fd_double: est[2], difference: est[3], c: est[3].mean.abs() / (3.0 * e2) })
}

/// Delta functional on an orthonormal family and its Riesz representative.
#[derive(Clone, Debug)]
pub struct DeltaReport<T> {
    pub valuation: Valuation,
    pub ids: Vec<String>,
    /// `Dp(η)(ψ_i)`.
    pub values: Vec<Estimate>,
    /// `E[Σ u_k ΔW_k]` per direction.
    pub weight_means: Vec<Estimate>,
    /// `ĝ = Σ Dp(η)(ψ_i)ψ_i`.
    pub representative: Segment<T>,
    /// `‖ĝ‖_{M₂}`.
    pub index: f64,
    /// `(Σ stderr_i²)^{1/2}`, the Monte Carlo error of `ĝ` in `M₂`.
    pub index_error: f64,
}

/// `delta_index`: operator norm of the delta on the span of an orthonormal dictionary.
pub fn delta_index<T: Real, M: Model<T> + ?Sized>(
    problem: &Problem<'_, T, M>,
    valuation: Valuation,
    params: &McParams,
    opts: &DeltaOptions,
    dictionary: &[Direction<T>],
) -> Result<DeltaReport<T>> {
    let tol = if T::epsilon().as_f64() > 1e-10 { 1e-4 } else { 1e-9 };
    check_orthonormal(dictionary, tol)?;
    let dirs: Vec<&Segment<T>> = dictionary.iter().map(|d| &d.segment).collect();
    let batch = delta_batch(problem, &dirs, &[valuation], params, opts)?;
    let values: Vec<Estimate> = batch.deltas.iter().map(|v| v[0]).collect();
    let mut rep = Segment::zeros(problem.eta.dim(), problem.eta.n_delay(), problem.eta.step());
    for (d, v) in dictionary.iter().zip(&values) {
        rep = rep.add_scaled(&d.segment, T::lit(v.mean))?;
    }
    let index = m2_norm(&rep.view()).as_f64();
    let index_error = values.iter().map(|v| v.stderr * v.stderr).sum::<f64>().sqrt();
    Ok(DeltaReport {
        valuation,
        ids: dictionary.iter().map(|d| d.id.clone()).collect(),
        values,
        weight_means: batch.weight_means,
        representative: rep,
        index,
        index_error,
    })
}
