//! Coefficient interface for SFDE market models.
//!
//! A model is described componentwise. Additive components carry their drift `f_i`
//! and diffusion row `g_i·` directly; geometric components carry `μ_i`, `σ_i·` with
//! `f_i = μ_i x_i` and `g_i· = σ_i· x_i`. Directional derivatives are supplied in the
//! same form and the product rule is applied here.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::segment::{Grid, Segment, SegmentView};

/// Deterministic function of time: constant or piecewise constant.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeFn {
    Constant(f64),
    /// `values[i]` on `[breaks[i-1], breaks[i])`, with `values.len() == breaks.len() + 1`.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl TimeFn {
    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(invalid("values", "piecewise function needs one more value than breakpoints"));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("breaks", "breakpoints must be strictly increasing"));
        }
        if breaks.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(invalid("values", "non-finite entry"));
        }
        Ok(TimeFn::Piecewise { breaks, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant(c) => *c,
            TimeFn::Piecewise { breaks, values } => values[breaks.partition_point(|&b| b <= t)],
        }
    }

    /// Exact `∫_{t0}^{t1}`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        match self {
            TimeFn::Constant(c) => c * (t1 - t0),
            TimeFn::Piecewise { breaks, values } => {
                let (lo, hi, sign) = if t0 <= t1 { (t0, t1, 1.0) } else { (t1, t0, -1.0) };
                let mut acc = 0.0;
                let mut a = lo;
                let mut i = breaks.partition_point(|&b| b <= lo);
                while a < hi {
                    let b = if i < breaks.len() { breaks[i].min(hi) } else { hi };
                    acc += values[i] * (b - a);
                    a = b;
                    i += 1;
                }
                sign * acc
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            TimeFn::Constant(c) => *c,
            TimeFn::Piecewise { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn at<T: Real>(&self, t: T) -> T {
        T::lit(self.eval(t.as_f64()))
    }
}

/// How a component's coefficients are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    /// `dx_i = f_i dt + g_i· dW`.
    Additive,
    /// `dx_i / x_i = μ_i dt + σ_i· dW`.
    Geometric,
}

/// Segment-dependent SFDE coefficients.
pub trait Model<T: Real>: Send + Sync {
    fn name(&self) -> &str;
    /// State dimension `d`.
    fn dim(&self) -> usize;
    /// Brownian dimension `m`.
    fn noise_dim(&self) -> usize;
    /// Largest lag used by the coefficients; must not exceed the grid delay.
    fn delay(&self) -> f64;
    fn component(&self, i: usize) -> Component;

    /// Fills `mu` (length `d`) and `sigma` (`d×m`, row-major) in component form.
    fn coefficients(&self, t: T, seg: SegmentView<'_, T>, mu: &mut [T], sigma: &mut [T]);

    /// Directional Fréchet derivatives of the component-form coefficients along `dir`.
    fn coefficient_derivatives(
        &self,
        t: T,
        seg: SegmentView<'_, T>,
        dir: SegmentView<'_, T>,
        dmu: &mut [T],
        dsigma: &mut [T],
    );

    /// Short rate `κ(t)`.
    fn rate(&self) -> &TimeFn;

    /// Index of the traded asset (a geometric component).
    fn asset(&self) -> usize {
        0
    }

    /// True when the market price of risk depends on time only.
    fn theta_state_independent(&self) -> bool {
        false
    }

    /// Dimension of the user-facing initial segment.
    fn input_dim(&self) -> usize {
        self.dim()
    }

    /// Maps a user-facing initial segment to the full state segment.
    fn embed(&self, eta: &Segment<T>) -> Result<Segment<T>> {
        Ok(eta.clone())
    }

    /// Derivative of [`Model::embed`] at `eta` along `psi`.
    fn embed_direction(&self, _eta: &Segment<T>, psi: &Segment<T>) -> Result<Segment<T>> {
        Ok(psi.clone())
    }

    /// Right inverse of the full diffusion matrix `g` (`d×m`), written as `m×d`.
    /// The default inverts `g` when square and uses `(gᵀg)⁻¹gᵀ` otherwise.
    fn right_inverse(&self, t: T, _seg: SegmentView<'_, T>, g: &[T], out: &mut [T]) -> Result<()> {
        pseudo_inverse(g, self.dim(), self.noise_dim(), out).ok_or(Error::SingularVolatility { time: t.as_f64() })
    }
}

/// Checks that the model's lags land on the grid.
pub fn check_model_grid<T: Real, M: Model<T> + ?Sized>(model: &M, grid: &Grid<T>) -> Result<()> {
    let r = model.delay();
    let h = grid.step().as_f64();
    if r > grid.delay().as_f64() * (1.0 + 1e-12) {
        return Err(Error::GridMismatch(format!(
            "model delay {r} exceeds grid delay {}",
            grid.delay().as_f64()
        )));
    }
    let ratio = r / h;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidGrid(format!("h = {h} does not divide model delay r = {r}")));
    }
    Ok(())
}

/// Converts component-form coefficients to `f` and `g` in place.
pub(crate) fn to_full_form<T: Real, M: Model<T> + ?Sized>(model: &M, x: &[T], mu: &mut [T], sigma: &mut [T]) {
    let m = model.noise_dim();
    for i in 0..model.dim() {
        if model.component(i) == Component::Geometric {
            mu[i] *= x[i];
            for s in &mut sigma[i * m..(i + 1) * m] {
                *s *= x[i];
            }
        }
    }
}

/// Product rule for geometric components: `D(μx)(ψ) = Dμ(ψ)x + μψ(0)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn derivative_full_form<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    x: &[T],
    v: &[T],
    mu: &[T],
    sigma: &[T],
    dmu: &mut [T],
    dsigma: &mut [T],
) {
    let m = model.noise_dim();
    for i in 0..model.dim() {
        if model.component(i) == Component::Geometric {
            dmu[i] = dmu[i] * x[i] + mu[i] * v[i];
            for l in 0..m {
                let j = i * m + l;
                dsigma[j] = dsigma[j] * x[i] + sigma[j] * v[i];
            }
        }
    }
}

/// `f(t, seg)`.
pub fn drift<T: Real, M: Model<T> + ?Sized>(model: &M, t: T, seg: SegmentView<'_, T>) -> Vec<T> {
    let (mut mu, mut sigma) = (vec![T::zero(); model.dim()], vec![T::zero(); model.dim() * model.noise_dim()]);
    model.coefficients(t, seg, &mut mu, &mut sigma);
    to_full_form(model, seg.v(), &mut mu, &mut sigma);
    mu
}

/// `g(t, seg)` as a `d×m` row-major matrix.
pub fn diffusion<T: Real, M: Model<T> + ?Sized>(model: &M, t: T, seg: SegmentView<'_, T>) -> Vec<T> {
    let (mut mu, mut sigma) = (vec![T::zero(); model.dim()], vec![T::zero(); model.dim() * model.noise_dim()]);
    model.coefficients(t, seg, &mut mu, &mut sigma);
    to_full_form(model, seg.v(), &mut mu, &mut sigma);
    sigma
}

fn full_derivatives<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    t: T,
    seg: SegmentView<'_, T>,
    dir: SegmentView<'_, T>,
) -> (Vec<T>, Vec<T>) {
    let (d, m) = (model.dim(), model.noise_dim());
    let (mut mu, mut sigma) = (vec![T::zero(); d], vec![T::zero(); d * m]);
    let (mut dmu, mut dsigma) = (vec![T::zero(); d], vec![T::zero(); d * m]);
    model.coefficients(t, seg, &mut mu, &mut sigma);
    model.coefficient_derivatives(t, seg, dir, &mut dmu, &mut dsigma);
    derivative_full_form(model, seg.v(), dir.v(), &mu, &sigma, &mut dmu, &mut dsigma);
    (dmu, dsigma)
}

/// `Df(t, seg)(dir)`.
pub fn ddrift<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    t: T,
    seg: SegmentView<'_, T>,
    dir: SegmentView<'_, T>,
) -> Vec<T> {
    full_derivatives(model, t, seg, dir).0
}

/// `Dg(t, seg)(dir)`.
pub fn ddiffusion<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    t: T,
    seg: SegmentView<'_, T>,
    dir: SegmentView<'_, T>,
) -> Vec<T> {
    full_derivatives(model, t, seg, dir).1
}

/// `g_R⁻¹(t, seg)` as an `m×d` row-major matrix.
pub fn diffusion_right_inverse<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    t: T,
    seg: SegmentView<'_, T>,
) -> Result<Vec<T>> {
    let g = diffusion(model, t, seg);
    let mut out = vec![T::zero(); model.dim() * model.noise_dim()];
    model.right_inverse(t, seg, &g, &mut out)?;
    Ok(out)
}

/// Inverse of an `n×n` row-major matrix by Gauss–Jordan elimination with partial pivoting.
pub(crate) fn invert<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut a = a.to_vec();
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = T::one();
    }
    let scale = a.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    if !(scale > T::zero()) || !scale.is_finite() {
        return None;
    }
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().partial_cmp(&a[j * n + c].abs()).unwrap())?;
        if a[p * n + c].abs() <= scale * T::epsilon() * T::lit(16.0) {
            return None;
        }
        for k in 0..n {
            a.swap(c * n + k, p * n + k);
            inv.swap(c * n + k, p * n + k);
        }
        let piv = a[c * n + c];
        for k in 0..n {
            a[c * n + k] /= piv;
            inv[c * n + k] /= piv;
        }
        for i in 0..n {
            if i != c {
                let f = a[i * n + c];
                if f != T::zero() {
                    for k in 0..n {
                        a[i * n + k] = a[i * n + k] - f * a[c * n + k];
                        inv[i * n + k] = inv[i * n + k] - f * inv[c * n + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Left pseudo-inverse `(gᵀg)⁻¹gᵀ` of a full-column-rank `d×m` matrix (`m ≤ d`).
pub(crate) fn pseudo_inverse<T: Real>(g: &[T], d: usize, m: usize, out: &mut [T]) -> Option<()> {
    if d == 1 && m == 1 {
        if g[0] == T::zero() || !g[0].is_finite() {
            return None;
        }
        out[0] = T::one() / g[0];
        return Some(());
    }
    if d == m {
        out.copy_from_slice(&invert(g, d)?);
        return Some(());
    }
    if m > d {
        return None;
    }
    let mut gtg = vec![T::zero(); m * m];
    for a in 0..m {
        for b in 0..m {
            gtg[a * m + b] = (0..d).fold(T::zero(), |acc, i| acc + g[i * m + a] * g[i * m + b]);
        }
    }
    let inv = invert(&gtg, m)?;
    for a in 0..m {
        for i in 0..d {
            out[a * d + i] = (0..m).fold(T::zero(), |acc, b| acc + inv[a * m + b] * g[i * m + b]);
        }
    }
    Some(())
}

/// Worst deviations found by [`probe_model`].
#[derive(Clone, Debug, Default)]
pub struct ProbeReport {
    /// `max |g g_R⁻¹ g − g|` (equals the `g g_R⁻¹ = I` check when `d = m`).
    pub right_inverse: f64,
    /// `max |g g_R⁻¹ − I|`; only meaningful for square diffusions.
    pub identity: Option<f64>,
    /// Linearity defect of the directional derivatives.
    pub linearity: f64,
    /// Central finite difference vs directional derivative, relative.
    pub fd_consistency: f64,
}

/// Probes right-inverse, linearity and finite-difference consistency at the given points.
pub fn probe_model<T: Real, M: Model<T> + ?Sized>(
    model: &M,
    points: &[(T, Segment<T>)],
    dirs: &[Segment<T>],
    eps: T,
) -> Result<ProbeReport> {
    let (d, m) = (model.dim(), model.noise_dim());
    let mut rep = ProbeReport::default();
    let mut identity = 0.0f64;
    for (t, seg) in points {
        let sv = seg.view();
        let g = diffusion(model, *t, sv);
        let gi = diffusion_right_inverse(model, *t, sv)?;
        let gg = matmul(&g, &gi, d, m, d);
        let ggg = matmul(&gg, &g, d, d, m);
        let gscale = g.iter().fold(1.0f64, |a, x| a.max(x.as_f64().abs()));
        for (a, b) in ggg.iter().zip(&g) {
            rep.right_inverse = rep.right_inverse.max((*a - *b).as_f64().abs() / gscale);
        }
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                identity = identity.max((gg[i * d + j].as_f64() - target).abs());
            }
        }
        for (n, a) in dirs.iter().enumerate() {
            let b = &dirs[(n + 1) % dirs.len()];
            let (ca, cb) = (T::lit(0.7), T::lit(-1.3));
            let comb = a.scaled(ca).add_scaled(b, cb)?;
            let lhs = [ddrift(model, *t, sv, comb.view()), ddiffusion(model, *t, sv, comb.view())].concat();
            let fa = [ddrift(model, *t, sv, a.view()), ddiffusion(model, *t, sv, a.view())].concat();
            let fb = [ddrift(model, *t, sv, b.view()), ddiffusion(model, *t, sv, b.view())].concat();
            for k in 0..lhs.len() {
                let rhs = ca * fa[k] + cb * fb[k];
                let scale = 1.0 + rhs.as_f64().abs();
                rep.linearity = rep.linearity.max((lhs[k] - rhs).as_f64().abs() / scale);
            }
            let up = seg.add_scaled(a, eps)?;
            let dn = seg.add_scaled(a, -eps)?;
            let fu = [drift(model, *t, up.view()), diffusion(model, *t, up.view())].concat();
            let fd = [drift(model, *t, dn.view()), diffusion(model, *t, dn.view())].concat();
            for k in 0..fu.len() {
                let num = (fu[k] - fd[k]) / (eps + eps);
                let scale = 1.0 + fa[k].as_f64().abs();
                rep.fd_consistency = rep.fd_consistency.max((num - fa[k]).as_f64().abs() / scale);
            }
        }
    }
    if d == m {
        rep.identity = Some(identity);
    }
    Ok(rep)
}

pub(crate) fn matmul<T: Real>(a: &[T], b: &[T], n: usize, k: usize, p: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * p];
    for i in 0..n {
        for j in 0..p {
            out[i * p + j] = (0..k).fold(T::zero(), |acc, l| acc + a[i * k + l] * b[l * p + j]);
        }
    }
    out
}
