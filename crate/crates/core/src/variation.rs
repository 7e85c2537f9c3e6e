//! First-variation flows and the Malliavin tangent matrix.
//!
//! Both are forward-mode derivatives of the Euler recursion in [`crate::engine`]: the
//! variation differentiates with respect to the initial segment, the tangent with
//! respect to each Brownian increment. They share one linearized step.

use crate::engine::{Stepping, Trajectory};
use crate::error::{Error, Result};
use crate::model::{Component, Model};
use crate::noise::Noise;
use crate::scalar::Real;
use crate::segment::{Path, Segment, SegmentView};

/// Linearized Euler step along a fixed base trajectory.
pub(crate) struct Linearized<'a, T, M: ?Sized> {
    pub model: &'a M,
    pub traj: &'a Trajectory<T>,
    pub noise: &'a Noise<T>,
    /// Component-form coefficient derivatives of the last step.
    pub dmu: Vec<T>,
    pub dsigma: Vec<T>,
    next: Vec<T>,
}

impl<'a, T: Real, M: Model<T> + ?Sized> Linearized<'a, T, M> {
    pub fn new(model: &'a M, traj: &'a Trajectory<T>, noise: &'a Noise<T>) -> Self {
        let (d, m) = (traj.dim(), traj.noise_dim());
        Self { model, traj, noise, dmu: vec![T::zero(); d], dsigma: vec![T::zero(); d * m], next: vec![T::zero(); d] }
    }

    /// Writes `lin(t_{k+1})` from the segment of `lin` at `t_k`.
    pub fn step(&mut self, k: usize, lin: &mut Path<T>) -> Result<()> {
        let (d, m) = (self.traj.dim(), self.traj.noise_dim());
        let grid = self.traj.grid();
        let h = grid.step();
        let t = grid.time(k);
        let base = &self.traj.path;
        let seg = base.segment(k);
        let dir = lin.segment(k);
        self.model.coefficient_derivatives(t, seg, dir, &mut self.dmu, &mut self.dsigma);
        let x = base.at(k);
        let a = dir.v();
        let mu = self.traj.mu(k);
        let sigma = self.traj.sigma(k);
        let dw = self.noise.dw(k);
        for c in 0..d {
            let row = c * m..(c + 1) * m;
            let dmu = self.dmu[c];
            let dsig = &self.dsigma[row.clone()];
            let sig = &sigma[row];
            self.next[c] = match (self.model.component(c), self.traj.stepping) {
                (Component::Additive, _) => {
                    a[c] + dmu * h + dsig.iter().zip(dw).fold(T::zero(), |s, (&v, &w)| s + v * w)
                }
                (Component::Geometric, Stepping::Direct) => {
                    let df = dmu * x[c] + mu[c] * a[c];
                    let dg = dsig.iter().zip(sig).zip(dw).fold(T::zero(), |s, ((&ds, &sg), &w)| {
                        s + (ds * x[c] + sg * a[c]) * w
                    });
                    a[c] + df * h + dg
                }
                (Component::Geometric, Stepping::LogEuler) => {
                    let x1 = base.at(k + 1)[c];
                    let ss = sig.iter().zip(dsig).fold(T::zero(), |s, (&v, &w)| s + v * w);
                    let dn = dsig.iter().zip(dw).fold(T::zero(), |s, (&v, &w)| s + v * w);
                    a[c] * self.traj.growth(k)[c] + x1 * ((dmu - ss) * h + dn)
                }
            };
            if !self.next[c].is_finite() {
                return Err(Error::BlowUp { step: k + 1, time: grid.time(k + 1).as_f64() });
            }
        }
        lin.at_mut(k + 1).copy_from_slice(&self.next);
        Ok(())
    }
}

/// `∂x_{k+1}/∂ΔW_k` as a `d×m` matrix.
pub fn noise_jacobian<T: Real, M: Model<T> + ?Sized>(model: &M, traj: &Trajectory<T>, k: usize) -> Vec<T> {
    let (d, m) = (traj.dim(), traj.noise_dim());
    let mut j = traj.diffusion(k).to_vec();
    if traj.stepping == Stepping::LogEuler {
        let x1 = traj.path.at(k + 1);
        let sigma = traj.sigma(k);
        for c in 0..d {
            if model.component(c) == Component::Geometric {
                for l in 0..m {
                    j[c * m + l] = x1[c] * sigma[c * m + l];
                }
            }
        }
    }
    j
}

/// Variation process `α = DX^0(η)(ψ)` on the grid.
#[derive(Clone, Debug)]
pub struct VariationPath<T> {
    pub alpha: Path<T>,
    pub psi: Segment<T>,
}

/// Variation restarted at step `s` from the segment `seg` (which lives in the tangent space at `x_s`).
pub fn variation_flow_from<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    traj: &Trajectory<T>,
    noise: &Noise<T>,
    s: usize,
    seg: &SegmentView<'_, T>,
) -> Result<Path<T>> {
    if s < traj.start() {
        return Err(Error::GridMismatch(format!("restart step {s} precedes the base path start {}", traj.start())));
    }
    let mut lin = Path::with_initial(*traj.grid(), s, seg)?;
    if seg.dim() != traj.dim() {
        return Err(Error::GridMismatch("direction dimension differs from state dimension".into()));
    }
    let mut step = Linearized::new(model, traj, noise);
    for k in s..traj.grid().n_steps() {
        step.step(k, &mut lin)?;
    }
    Ok(lin)
}

/// `variation_flow`: the first variation along `psi` (a state-space direction).
pub fn variation_flow<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    traj: &Trajectory<T>,
    noise: &Noise<T>,
    psi: &Segment<T>,
) -> Result<VariationPath<T>> {
    let alpha = variation_flow_from(model, traj, noise, traj.start(), &psi.view())?;
    Ok(VariationPath { alpha, psi: psi.clone() })
}

/// Dense lower-triangular tangent `D[j][k] = ∂x_{t_k}/∂ΔW_j`, `d×m` blocks.
#[derive(Clone, Debug)]
pub struct TangentMatrix<T> {
    n: usize,
    d: usize,
    m: usize,
    data: Vec<T>,
}

impl<T: Real> TangentMatrix<T> {
    /// Block `D[j][k]`; zero for `k ≤ j`.
    pub fn block(&self, j: usize, k: usize) -> &[T] {
        let w = self.d * self.m;
        let o = (j * (self.n + 1) + k) * w;
        &self.data[o..o + w]
    }
    pub fn n_steps(&self) -> usize {
        self.n
    }
    /// `D[j][k]` entry for state component `i` and noise component `l`.
    pub fn entry(&self, j: usize, k: usize, i: usize, l: usize) -> T {
        self.block(j, k)[i * self.m + l]
    }
}

/// `malliavin_tangent`: all columns, advanced together one time step at a time.
pub fn malliavin_tangent<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    traj: &Trajectory<T>,
    noise: &Noise<T>,
) -> Result<TangentMatrix<T>> {
    let grid = *traj.grid();
    let (n, d, m) = (grid.n_steps(), traj.dim(), traj.noise_dim());
    let s = traj.start();
    let zero = Segment::zeros(d, grid.n_delay(), grid.step());
    // one linear path per (j, l), started with zero history at t_{j+1}
    let mut cols: Vec<Path<T>> = Vec::with_capacity((n - s) * m);
    for j in s..n {
        let jac = noise_jacobian(model, traj, j);
        for l in 0..m {
            let mut p = Path::with_initial(grid, j + 1, &zero.view())?;
            let v: Vec<T> = (0..d).map(|i| jac[i * m + l]).collect();
            p.at_mut(j + 1).copy_from_slice(&v);
            cols.push(p);
        }
    }
    let mut step = Linearized::new(model, traj, noise);
    for k in s + 1..n {
        for j in s..k {
            for l in 0..m {
                step.step(k, &mut cols[(j - s) * m + l])?;
            }
        }
    }
    let w = d * m;
    let mut data = vec![T::zero(); n * (n + 1) * w];
    for j in s..n {
        for l in 0..m {
            let col = &cols[(j - s) * m + l];
            for k in j + 1..=n {
                let x = col.at(k);
                for i in 0..d {
                    data[(j * (n + 1) + k) * w + i * m + l] = x[i];
                }
            }
        }
    }
    Ok(TangentMatrix { n, d, m, data })
}

/// Column `j` (noise component `l`) as the variation restarted at `t_{j+1}` from the
/// impulse `∂x_{j+1}/∂ΔW_j · e_l` with zero history.
pub fn tangent_column<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    traj: &Trajectory<T>,
    noise: &Noise<T>,
    j: usize,
    l: usize,
) -> Result<Path<T>> {
    let grid = traj.grid();
    let (d, m) = (traj.dim(), traj.noise_dim());
    let jac = noise_jacobian(model, traj, j);
    let mut seg = Segment::zeros(d, grid.n_delay(), grid.step());
    for i in 0..d {
        seg.v_mut()[i] = jac[i * m + l];
    }
    variation_flow_from(model, traj, noise, j + 1, &seg.view())
}

/// `check_flow_malliavin_bridge`: max over `k > j` and components of
/// `|D[j][k] − restarted variation at t_k|`.
pub fn check_flow_malliavin_bridge<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    traj: &Trajectory<T>,
    noise: &Noise<T>,
    tangent: &TangentMatrix<T>,
    j: usize,
) -> Result<f64> {
    let n = traj.grid().n_steps();
    let (d, m) = (traj.dim(), traj.noise_dim());
    let mut worst = 0.0f64;
    for l in 0..m {
        let col = tangent_column(model, traj, noise, j, l)?;
        for k in j + 1..=n {
            for i in 0..d {
                worst = worst.max((tangent.entry(j, k, i, l) - col.at(k)[i]).as_f64().abs());
            }
        }
    }
    Ok(worst)
}
