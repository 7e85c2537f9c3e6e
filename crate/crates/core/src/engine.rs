//! Euler–Maruyama solver for segment-dependent SDEs.

use crate::error::{Error, Result};
use crate::model::{check_model_grid, to_full_form, Component, Model};
use crate::noise::Noise;
use crate::scalar::Real;
use crate::segment::{Grid, Path, SegmentView};

/// Time stepping for geometric components (additive ones always use direct Euler).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stepping {
    /// `x_{k+1} = x_k + μ x_k h + σ x_k ΔW`.
    Direct,
    /// `x_{k+1} = x_k exp((μ − ½|σ|²)h + σΔW)`; stays positive.
    #[default]
    LogEuler,
}

/// A solved path together with the coefficients frozen at every step.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub path: Path<T>,
    pub stepping: Stepping,
    d: usize,
    m: usize,
    mu: Vec<T>,
    sigma: Vec<T>,
    g: Vec<T>,
    growth: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn grid(&self) -> &Grid<T> {
        self.path.grid()
    }
    pub fn start(&self) -> usize {
        self.path.start()
    }
    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn noise_dim(&self) -> usize {
        self.m
    }
    /// Component-form drift coefficients `μ` (or `f` for additive components) at step `k`.
    #[inline]
    pub fn mu(&self, k: usize) -> &[T] {
        let i = k - self.start();
        &self.mu[i * self.d..(i + 1) * self.d]
    }
    /// Component-form volatility `σ` (or `g`) at step `k`, `d×m`.
    #[inline]
    pub fn sigma(&self, k: usize) -> &[T] {
        let i = k - self.start();
        let w = self.d * self.m;
        &self.sigma[i * w..(i + 1) * w]
    }
    /// Full diffusion matrix `g(t_k, x_{t_k})`, `d×m`.
    #[inline]
    pub fn diffusion(&self, k: usize) -> &[T] {
        let i = k - self.start();
        let w = self.d * self.m;
        &self.g[i * w..(i + 1) * w]
    }
    /// `x_{k+1,i} / x_{k,i}` for log-Euler geometric components (unused otherwise).
    #[inline]
    pub fn growth(&self, k: usize) -> &[T] {
        let i = k - self.start();
        &self.growth[i * self.d..(i + 1) * self.d]
    }
}

fn validate<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    grid: &Grid<T>,
    seg: &SegmentView<'_, T>,
    noise: &Noise<T>,
) -> Result<()> {
    check_model_grid(model, grid)?;
    if seg.dim() != model.dim() {
        return Err(Error::GridMismatch(format!(
            "segment dimension {} but model `{}` has d = {}",
            seg.dim(),
            model.name(),
            model.dim()
        )));
    }
    if noise.dim() != model.noise_dim() || noise.n_steps() != grid.n_steps() {
        return Err(Error::GridMismatch(format!(
            "noise has {} steps of dimension {}, expected {} of dimension {}",
            noise.n_steps(),
            noise.dim(),
            grid.n_steps(),
            model.noise_dim()
        )));
    }
    if (noise.step() - grid.step()).abs() > grid.step() * T::lit(1e-9) {
        return Err(Error::GridMismatch("noise step differs from grid step".into()));
    }
    Ok(())
}

/// Solves on `[s·h − r, T]` from the segment `seg` at step `s`, recording the coefficients.
pub fn simulate_from<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    s: usize,
    seg: &SegmentView<'_, T>,
    grid: &Grid<T>,
    noise: &Noise<T>,
    stepping: Stepping,
) -> Result<Trajectory<T>> {
    validate(model, grid, seg, noise)?;
    let (d, m) = (model.dim(), model.noise_dim());
    let n = grid.n_steps();
    let h = grid.step();
    let mut path = Path::with_initial(*grid, s, seg)?;
    let steps = n - s;
    let mut mu_all = vec![T::zero(); steps * d];
    let mut sigma_all = vec![T::zero(); steps * d * m];
    let mut g_all = vec![T::zero(); steps * d * m];
    let mut growth_all = vec![T::one(); steps * d];
    let mut next = vec![T::zero(); d];
    let mut f = vec![T::zero(); d];
    let half = T::lit(0.5);
    for k in s..n {
        let t = grid.time(k);
        let i = k - s;
        let mu = &mut mu_all[i * d..(i + 1) * d];
        let sigma = &mut sigma_all[i * d * m..(i + 1) * d * m];
        model.coefficients(t, path.segment(k), mu, sigma);
        let x = path.at(k);
        let g = &mut g_all[i * d * m..(i + 1) * d * m];
        g.copy_from_slice(sigma);
        f.copy_from_slice(mu);
        to_full_form(model, x, &mut f, g);
        let dw = noise.dw(k);
        for c in 0..d {
            let row = c * m..(c + 1) * m;
            next[c] = match (model.component(c), stepping) {
                (Component::Geometric, Stepping::LogEuler) => {
                    let s2 = sigma[row.clone()].iter().fold(T::zero(), |a, &v| a + v * v);
                    let noise_term = sigma[row].iter().zip(dw).fold(T::zero(), |a, (&v, &w)| a + v * w);
                    let e = ((mu[c] - half * s2) * h + noise_term).exp();
                    growth_all[i * d + c] = e;
                    x[c] * e
                }
                _ => x[c] + f[c] * h + g[row].iter().zip(dw).fold(T::zero(), |a, (&v, &w)| a + v * w),
            };
            if !next[c].is_finite() {
                return Err(Error::BlowUp { step: k + 1, time: grid.time(k + 1).as_f64() });
            }
        }
        path.at_mut(k + 1).copy_from_slice(&next);
    }
    Ok(Trajectory { path, stepping, d, m, mu: mu_all, sigma: sigma_all, g: g_all, growth: growth_all })
}

/// [`simulate_from`] at `s = 0`.
pub fn simulate<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    eta: &SegmentView<'_, T>,
    grid: &Grid<T>,
    noise: &Noise<T>,
    stepping: Stepping,
) -> Result<Trajectory<T>> {
    simulate_from(model, 0, eta, grid, noise, stepping)
}

/// `euler_solve`: the path on `[-r, T]` started from `eta`.
pub fn euler_solve<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    eta: &SegmentView<'_, T>,
    grid: &Grid<T>,
    noise: &Noise<T>,
    stepping: Stepping,
) -> Result<Path<T>> {
    Ok(simulate(model, eta, grid, noise, stepping)?.path)
}

/// `euler_solve_from`: the restarted path on `[s − r, T]`, reading `noise` from step `s` on.
pub fn euler_solve_from<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    s: usize,
    seg: &SegmentView<'_, T>,
    grid: &Grid<T>,
    noise: &Noise<T>,
    stepping: Stepping,
) -> Result<Path<T>> {
    Ok(simulate_from(model, s, seg, grid, noise, stepping)?.path)
}
