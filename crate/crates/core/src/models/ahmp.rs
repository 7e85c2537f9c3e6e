use super::lag_steps;
use crate::error::{invalid, Error, Result};
use crate::model::{Component, Model, TimeFn};
use crate::noise::Noise;
use crate::scalar::Real;
use crate::segment::{Grid, Segment, SegmentView};

/// Discrete-delay geometric model `dS/S = μ(t)S(t−r)dt + σ(t)dW`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ahmp {
    pub mu: TimeFn,
    pub sigma: TimeFn,
    pub r: f64,
    pub rate: TimeFn,
}

pub fn ahmp_model(mu: TimeFn, sigma: TimeFn, r: f64, rate: TimeFn) -> Result<Ahmp> {
    if !(sigma.min_value() > 0.0) {
        return Err(invalid("sigma", "volatility function must be positive"));
    }
    if !(r > 0.0) {
        return Err(invalid("r", "delay must be positive"));
    }
    Ok(Ahmp { mu, sigma, r, rate })
}

impl<T: Real> Model<T> for Ahmp {
    fn name(&self) -> &str {
        "ahmp"
    }
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn delay(&self) -> f64 {
        self.r
    }
    fn component(&self, _i: usize) -> Component {
        Component::Geometric
    }
    fn coefficients(&self, t: T, seg: SegmentView<'_, T>, mu: &mut [T], sigma: &mut [T]) {
        let lagged = seg.lagged(lag_steps(self.r, seg.step().as_f64()))[0];
        mu[0] = self.mu.at(t) * lagged;
        sigma[0] = self.sigma.at(t);
    }
    fn coefficient_derivatives(
        &self,
        t: T,
        seg: SegmentView<'_, T>,
        dir: SegmentView<'_, T>,
        dmu: &mut [T],
        dsigma: &mut [T],
    ) {
        dmu[0] = self.mu.at(t) * dir.lagged(lag_steps(self.r, seg.step().as_f64()))[0];
        dsigma[0] = T::zero();
    }
    fn rate(&self) -> &TimeFn {
        &self.rate
    }
    fn embed(&self, eta: &Segment<T>) -> Result<Segment<T>> {
        if !(eta.v()[0] > T::zero()) {
            return Err(invalid("eta", "η(0) must be positive"));
        }
        Ok(eta.clone())
    }
}

fn check_window<T: Real>(model: &Ahmp, grid: &Grid<T>, k: usize) -> Result<usize> {
    let n_r = lag_steps(model.r, grid.step().as_f64());
    if k > n_r || k > grid.n_steps() {
        return Err(Error::Unsupported(format!("closed form holds on [0, r] only (step {k} > {n_r})")));
    }
    Ok(n_r)
}

/// `η(0)exp{∫₀ᵗ(μ(u)η(u−r) − ½σ(u)²)du + ∫₀ᵗσ(u)dW(u)}` at `t_0..=t_k` (`t_k ≤ r`), with
/// left-point quadrature on the given noise.
pub fn ahmp_closed_path<T: Real>(model: &Ahmp, eta: &Segment<T>, grid: &Grid<T>, noise: &Noise<T>, k: usize) -> Result<Vec<T>> {
    let n_r = check_window(model, grid, k)?;
    let h = grid.step();
    let offset = eta.n_delay() - n_r;
    let half = T::lit(0.5);
    let mut log = eta.v()[0].ln();
    let mut out = Vec::with_capacity(k + 1);
    out.push(eta.v()[0]);
    for j in 0..k {
        let t = grid.time(j);
        let lagged = if offset + j < eta.n_delay() { eta.phi(offset + j)[0] } else { eta.v()[0] };
        let s = model.sigma.at(t);
        log += (model.mu.at(t) * lagged - half * s * s) * h + s * noise.dw(j)[0];
        out.push(log.exp());
    }
    Ok(out)
}

/// `X_t(ψ(0)/η(0) + ∫₀ᵗ μ(u)ψ(u−r)du)` for `t_0..=t_k` (`t_k ≤ r`), on a given path `x`.
pub fn ahmp_variation_closed<T: Real>(
    model: &Ahmp,
    eta: &Segment<T>,
    psi: &Segment<T>,
    grid: &Grid<T>,
    x: &[T],
) -> Result<Vec<T>> {
    let k = x.len().saturating_sub(1);
    let n_r = check_window(model, grid, k)?;
    let h = grid.step();
    let offset = psi.n_delay() - n_r;
    let mut acc = psi.v()[0] / eta.v()[0];
    let mut out = Vec::with_capacity(k + 1);
    out.push(x[0] * acc);
    for j in 0..k {
        let lagged = if offset + j < psi.n_delay() { psi.phi(offset + j)[0] } else { psi.v()[0] };
        acc += model.mu.at(grid.time(j)) * lagged * h;
        out.push(x[j + 1] * acc);
    }
    Ok(out)
}
