use std::fmt;

use super::lag_steps;
use crate::error::{invalid, Result};
use crate::model::{Component, Model, TimeFn};
use crate::scalar::Real;
use crate::segment::SegmentView;

type Functional<T> = Box<dyn Fn(T, SegmentView<'_, T>) -> T + Send + Sync>;
type Derivative<T> = Box<dyn Fn(T, SegmentView<'_, T>, SegmentView<'_, T>) -> T + Send + Sync>;

/// Scalar geometric SFDE `dS/S = μ(t, S_t)dt + σ(t, S_t)dW` from user functionals.
pub struct GeometricModel<T> {
    name: String,
    r: f64,
    rate: TimeFn,
    mu: Functional<T>,
    sigma: Functional<T>,
    dmu: Derivative<T>,
    dsigma: Derivative<T>,
}

impl<T> fmt::Debug for GeometricModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeometricModel").field("name", &self.name).field("r", &self.r).finish()
    }
}

impl<T: Real> GeometricModel<T> {
    /// `dmu`/`dsigma` must be the directional derivatives of `mu`/`sigma`.
    pub fn new(
        name: impl Into<String>,
        r: f64,
        rate: TimeFn,
        mu: impl Fn(T, SegmentView<'_, T>) -> T + Send + Sync + 'static,
        sigma: impl Fn(T, SegmentView<'_, T>) -> T + Send + Sync + 'static,
        dmu: impl Fn(T, SegmentView<'_, T>, SegmentView<'_, T>) -> T + Send + Sync + 'static,
        dsigma: impl Fn(T, SegmentView<'_, T>, SegmentView<'_, T>) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            r,
            rate,
            mu: Box::new(mu),
            sigma: Box::new(sigma),
            dmu: Box::new(dmu),
            dsigma: Box::new(dsigma),
        }
    }
}

/// `c0 + c_lag·S(t−r) + c_avg·(1/r)∫_{-r}^0 S(t+u)du`, the functional family exposed by the CLI.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LinearFunctional {
    pub constant: f64,
    pub lagged: f64,
    pub average: f64,
}

impl LinearFunctional {
    fn eval<T: Real>(&self, seg: SegmentView<'_, T>, lag: usize, with_constant: bool) -> T {
        let mut v = if with_constant { T::lit(self.constant) } else { T::zero() };
        if self.lagged != 0.0 {
            v += T::lit(self.lagged) * seg.lagged(lag)[0];
        }
        if self.average != 0.0 && lag > 0 {
            let n = seg.n_delay();
            let mean = (n - lag..n).fold(T::zero(), |a, k| a + seg.phi(k)[0]) / T::from_usize_lossy(lag);
            v += T::lit(self.average) * mean;
        }
        v
    }

    /// Geometric model with `μ` and `σ` from this family.
    pub fn model<T: Real>(mu: LinearFunctional, sigma: LinearFunctional, r: f64, rate: TimeFn) -> Result<GeometricModel<T>> {
        if (mu.lagged != 0.0 || mu.average != 0.0 || sigma.average != 0.0) && !(r > 0.0) {
            return Err(invalid("r", "lagged and average terms need a positive delay"));
        }
        if sigma.lagged != 0.0 {
            return Err(invalid("sigma", "delay in the diffusion does not admit a stochastic flow"));
        }
        let lag = move |seg: SegmentView<'_, T>| lag_steps(r, seg.step().as_f64());
        Ok(GeometricModel::new(
            "custom-geometric",
            r,
            rate,
            move |_t, seg| mu.eval(seg, lag(seg), true),
            move |_t, seg| sigma.eval(seg, lag(seg), true),
            move |_t, seg, dir| mu.eval(dir, lag(seg), false),
            move |_t, seg, dir| sigma.eval(dir, lag(seg), false),
        ))
    }
}

impl<T: Real> Model<T> for GeometricModel<T> {
    fn name(&self) -> &str {
        &self.name
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
        mu[0] = (self.mu)(t, seg);
        sigma[0] = (self.sigma)(t, seg);
    }
    fn coefficient_derivatives(
        &self,
        t: T,
        seg: SegmentView<'_, T>,
        dir: SegmentView<'_, T>,
        dmu: &mut [T],
        dsigma: &mut [T],
    ) {
        dmu[0] = (self.dmu)(t, seg, dir);
        dsigma[0] = (self.dsigma)(t, seg, dir);
    }
    fn rate(&self) -> &TimeFn {
        &self.rate
    }
}
