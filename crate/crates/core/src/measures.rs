//! Bond, Girsanov density and growth-optimal portfolio along a simulated path.

use crate::engine::{simulate, Trajectory};
use crate::error::{Error, Result};
use crate::mc::{run_paths, Estimate, McParams};
use crate::model::{Component, Model, TimeFn};
use crate::noise::{generate_noise, Noise};
use crate::scalar::Real;
use crate::segment::{Grid, Segment, SegmentView};

fn asset_checks<T: Real, M: Model<T> + ?Sized>(model: &M) -> Result<usize> {
    let a = model.asset();
    if model.noise_dim() != 1 {
        return Err(Error::Unsupported("market price of risk needs a scalar Brownian driver".into()));
    }
    if model.component(a) != Component::Geometric {
        return Err(Error::Unsupported("traded asset must be a geometric component".into()));
    }
    Ok(a)
}

/// `θ = (μ − κ)/σ` from component-form coefficients of the asset.
#[inline]
pub(crate) fn theta_of<T: Real>(mu: T, sigma: T, kappa: T, t: T) -> Result<T> {
    if sigma == T::zero() || !sigma.is_finite() {
        return Err(Error::SingularVolatility { time: t.as_f64() });
    }
    Ok((mu - kappa) / sigma)
}

/// `Dθ(ψ) = [Dμ(ψ) − θDσ(ψ)]/σ`.
#[inline]
pub(crate) fn dtheta_of<T: Real>(theta: T, sigma: T, dmu: T, dsigma: T) -> T {
    (dmu - theta * dsigma) / sigma
}

/// `market_price_of_risk`: `θ(t, seg) = (μ(t, seg) − κ(t))/σ(t, seg)` for the traded asset.
pub fn market_price_of_risk<T: Real, M: Model<T> + ?Sized>(model: &M, t: T, seg: SegmentView<'_, T>) -> Result<T> {
    let a = asset_checks(model)?;
    let (mut mu, mut sigma) = (vec![T::zero(); model.dim()], vec![T::zero(); model.dim()]);
    model.coefficients(t, seg, &mut mu, &mut sigma);
    theta_of(mu[a], sigma[a], model.rate().at(t), t)
}

/// Directional derivative of [`market_price_of_risk`] along `dir`.
pub fn dtheta<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    t: T,
    seg: SegmentView<'_, T>,
    dir: SegmentView<'_, T>,
) -> Result<T> {
    let a = asset_checks(model)?;
    let d = model.dim();
    let (mut mu, mut sigma) = (vec![T::zero(); d], vec![T::zero(); d]);
    let (mut dmu, mut dsigma) = (vec![T::zero(); d], vec![T::zero(); d]);
    model.coefficients(t, seg, &mut mu, &mut sigma);
    model.coefficient_derivatives(t, seg, dir, &mut dmu, &mut dsigma);
    let th = theta_of(mu[a], sigma[a], model.rate().at(t), t)?;
    Ok(dtheta_of(th, sigma[a], dmu[a], dsigma[a]))
}

/// Running `log M`, `log G`, `log B` at grid times and `θ` at step starts.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurePath<T> {
    pub theta: Vec<T>,
    pub log_m: Vec<T>,
    pub log_g: Vec<T>,
    pub log_b: Vec<T>,
}

impl<T: Real> MeasurePath<T> {
    /// `M(T)`.
    pub fn density(&self) -> T {
        self.log_m.last().copied().unwrap_or(T::zero()).exp()
    }
    /// `G(T)`.
    pub fn gop(&self) -> T {
        self.log_g.last().copied().unwrap_or(T::zero()).exp()
    }
    /// `B(T)`.
    pub fn bond(&self) -> T {
        self.log_b.last().copied().unwrap_or(T::zero()).exp()
    }
}

/// `∫_0^{t_k} κ` for `k = 0..=n`, accumulated from exact step integrals.
pub fn log_bond<T: Real>(rate: &TimeFn, grid: &Grid<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    let mut acc = T::zero();
    out.push(acc);
    for k in 0..grid.n_steps() {
        acc += T::lit(rate.integral(grid.time(k).as_f64(), grid.time(k + 1).as_f64()));
        out.push(acc);
    }
    out
}

/// `simulate_measures`: log-space recursions for `M` and `G` driven by the path's `θ`.
pub fn simulate_measures<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    traj: &Trajectory<T>,
    noise: &Noise<T>,
) -> Result<MeasurePath<T>> {
    let a = asset_checks(model)?;
    let grid = *traj.grid();
    let n = grid.n_steps();
    let h = grid.step();
    let half = T::lit(0.5);
    let rate = model.rate();
    let mut theta = Vec::with_capacity(n);
    let (mut log_m, mut log_g, mut log_b) = (vec![T::zero()], vec![T::zero()], vec![T::zero()]);
    let (mut lm, mut lg, mut lb) = (T::zero(), T::zero(), T::zero());
    for k in traj.start()..n {
        let t = grid.time(k);
        let th = theta_of(traj.mu(k)[a], traj.sigma(k)[a], rate.at(t), t)?;
        let dw = noise.dw(k)[0];
        let kint = T::lit(rate.integral(t.as_f64(), grid.time(k + 1).as_f64()));
        lm += -th * dw - half * th * th * h;
        lg += kint + half * th * th * h + th * dw;
        lb += kint;
        theta.push(th);
        log_m.push(lm);
        log_g.push(lg);
        log_b.push(lb);
    }
    Ok(MeasurePath { theta, log_m, log_g, log_b })
}

/// Drift of every component shifted by `−g·θ`, i.e. the dynamics under `Q`.
/// For the traded asset this replaces `μ` by `κ`.
pub struct RiskNeutral<'a, M: ?Sized> {
    inner: &'a M,
}

impl<'a, M: ?Sized> RiskNeutral<'a, M> {
    pub fn new(inner: &'a M) -> Self {
        Self { inner }
    }
}

impl<T: Real, M: Model<T> + ?Sized> Model<T> for RiskNeutral<'_, M> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }
    fn delay(&self) -> f64 {
        self.inner.delay()
    }
    fn component(&self, i: usize) -> Component {
        self.inner.component(i)
    }
    fn coefficients(&self, t: T, seg: SegmentView<'_, T>, mu: &mut [T], sigma: &mut [T]) {
        self.inner.coefficients(t, seg, mu, sigma);
        let a = self.inner.asset();
        let th = (mu[a] - self.inner.rate().at(t)) / sigma[a];
        for i in 0..mu.len() {
            mu[i] -= sigma[i] * th;
        }
    }
    fn coefficient_derivatives(
        &self,
        t: T,
        seg: SegmentView<'_, T>,
        dir: SegmentView<'_, T>,
        dmu: &mut [T],
        dsigma: &mut [T],
    ) {
        let d = self.inner.dim();
        let (mut mu, mut sigma) = (vec![T::zero(); d], vec![T::zero(); d]);
        self.inner.coefficients(t, seg, &mut mu, &mut sigma);
        self.inner.coefficient_derivatives(t, seg, dir, dmu, dsigma);
        let a = self.inner.asset();
        let th = (mu[a] - self.inner.rate().at(t)) / sigma[a];
        let dth = dtheta_of(th, sigma[a], dmu[a], dsigma[a]);
        for i in 0..d {
            dmu[i] -= dsigma[i] * th + sigma[i] * dth;
        }
    }
    fn rate(&self) -> &TimeFn {
        self.inner.rate()
    }
    fn asset(&self) -> usize {
        self.inner.asset()
    }
    fn theta_state_independent(&self) -> bool {
        self.inner.theta_state_independent()
    }
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn embed(&self, eta: &Segment<T>) -> Result<Segment<T>> {
        self.inner.embed(eta)
    }
    fn embed_direction(&self, eta: &Segment<T>, psi: &Segment<T>) -> Result<Segment<T>> {
        self.inner.embed_direction(eta, psi)
    }
    fn right_inverse(&self, t: T, seg: SegmentView<'_, T>, g: &[T], out: &mut [T]) -> Result<()> {
        self.inner.right_inverse(t, seg, g, out)
    }
}

/// One probe time of [`benchmarked_martingale_diag`].
#[derive(Clone, Debug)]
pub struct MartingaleProbe {
    pub time: f64,
    /// `E[S(t)/G(t)]`.
    pub estimate: Estimate,
    /// `η(0)` of the asset.
    pub target: f64,
    /// `|mean − target| > 3·stderr`.
    pub violated: bool,
}

/// Ensemble diagnostics of the measure change.
#[derive(Clone, Debug)]
pub struct MartingaleReport {
    pub probes: Vec<MartingaleProbe>,
    /// `E[M(T)]`, should be 1.
    pub density: Estimate,
    /// `E[1/G(T)]`, should be `exp(−∫κ)`.
    pub inverse_gop: Estimate,
    pub discount: f64,
}

/// `benchmarked_martingale_diag`: `E[S(t)/G(t)]` at the probe steps, `E[M(T)]` and `E[1/G(T)]`.
pub fn benchmarked_martingale_diag<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    grid: &Grid<T>,
    eta: &Segment<T>,
    params: &McParams,
    probe_steps: &[usize],
) -> Result<MartingaleReport> {
    params.validate()?;
    let a = asset_checks(model)?;
    let state = model.embed(eta)?;
    let s0 = state.v()[a].as_f64();
    let n = grid.n_steps();
    if let Some(&k) = probe_steps.iter().find(|&&k| k > n) {
        return Err(Error::InvalidGrid(format!("probe step {k} beyond horizon")));
    }
    let width = probe_steps.len() + 2;
    let est = run_paths(params.n_paths, width, |p, out| {
        let noise = generate_noise(params.seed, p, n, model.noise_dim(), grid.step());
        let traj = simulate(model, &state.view(), grid, &noise, params.stepping)?;
        let meas = simulate_measures(model, &traj, &noise)?;
        for (o, &k) in out.iter_mut().zip(probe_steps) {
            *o = (traj.path.at(k)[a] / meas.log_g[k].exp()).as_f64();
        }
        out[width - 2] = meas.density().as_f64();
        out[width - 1] = 1.0 / meas.gop().as_f64();
        Ok(())
    })?;
    let probes = probe_steps
        .iter()
        .zip(&est)
        .map(|(&k, e)| MartingaleProbe {
            time: grid.time(k).as_f64(),
            estimate: *e,
            target: s0,
            violated: (e.mean - s0).abs() > 3.0 * e.stderr,
        })
        .collect();
    let discount = (-model.rate().integral(0.0, grid.horizon().as_f64())).exp();
    Ok(MartingaleReport { probes, density: est[width - 2], inverse_gop: est[width - 1], discount })
}
