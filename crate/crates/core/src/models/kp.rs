use super::lag_steps;
use crate::error::{invalid, Error, Result};
use crate::model::{Component, Model, TimeFn};
use crate::scalar::Real;
use crate::segment::{Segment, SegmentView};

/// Küchler–Platen model on the pair `(S, Y)` driven by one Brownian motion:
///
/// `dY(t) = −μY(t−r)dt + σdW(t)`, `S(t) = α₁exp(α₂Y(t) + α₃t)`, hence
/// `dS/S = (−C₁Y(t−r) + C₂)dt + C₃dW` with `C₁ = α₂μ`, `C₂ = α₃ + ½α₂²σ²`, `C₃ = α₂σ`.
///
/// The user-facing initial segment is `η_Y`; the `S` history follows from the map above.
#[derive(Clone, Debug, PartialEq)]
pub struct KuchlerPlaten {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    pub rate: TimeFn,
}

pub fn kp_model(alpha1: f64, alpha2: f64, alpha3: f64, mu: f64, sigma: f64, r: f64, rate: TimeFn) -> Result<KuchlerPlaten> {
    if !(alpha1 > 0.0) {
        return Err(invalid("alpha1", "must be positive so that S > 0"));
    }
    if !(r > 0.0) {
        return Err(invalid("r", "delay must be positive"));
    }
    if alpha2 * sigma == 0.0 || !(alpha2 * sigma).is_finite() {
        return Err(invalid("sigma", "C3 = alpha2 * sigma must be non-zero"));
    }
    if ![alpha3, mu].iter().all(|x| x.is_finite()) {
        return Err(invalid("mu", "parameters must be finite"));
    }
    Ok(KuchlerPlaten { alpha1, alpha2, alpha3, mu, sigma, r, rate })
}

impl KuchlerPlaten {
    pub fn c1(&self) -> f64 {
        self.alpha2 * self.mu
    }
    pub fn c2(&self) -> f64 {
        self.alpha3 + 0.5 * self.alpha2 * self.alpha2 * self.sigma * self.sigma
    }
    pub fn c3(&self) -> f64 {
        self.alpha2 * self.sigma
    }
    /// `α₁exp(α₂y + α₃t)`.
    pub fn price_of<T: Real>(&self, y: T, t: T) -> T {
        T::lit(self.alpha1) * (T::lit(self.alpha2) * y + T::lit(self.alpha3) * t).exp()
    }
}

impl<T: Real> Model<T> for KuchlerPlaten {
    fn name(&self) -> &str {
        "kp"
    }
    fn dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn delay(&self) -> f64 {
        self.r
    }
    fn component(&self, i: usize) -> Component {
        if i == 0 {
            Component::Geometric
        } else {
            Component::Additive
        }
    }
    fn coefficients(&self, _t: T, seg: SegmentView<'_, T>, mu: &mut [T], sigma: &mut [T]) {
        let y_lag = seg.lagged(lag_steps(self.r, seg.step().as_f64()))[1];
        mu[0] = T::lit(self.c2()) - T::lit(self.c1()) * y_lag;
        sigma[0] = T::lit(self.c3());
        mu[1] = -T::lit(self.mu) * y_lag;
        sigma[1] = T::lit(self.sigma);
    }
    fn coefficient_derivatives(
        &self,
        _t: T,
        seg: SegmentView<'_, T>,
        dir: SegmentView<'_, T>,
        dmu: &mut [T],
        dsigma: &mut [T],
    ) {
        let psi_lag = dir.lagged(lag_steps(self.r, seg.step().as_f64()))[1];
        dmu[0] = -T::lit(self.c1()) * psi_lag;
        dsigma[0] = T::zero();
        dmu[1] = -T::lit(self.mu) * psi_lag;
        dsigma[1] = T::zero();
    }
    fn rate(&self) -> &TimeFn {
        &self.rate
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn embed(&self, eta: &Segment<T>) -> Result<Segment<T>> {
        if eta.dim() != 1 {
            return Err(Error::GridMismatch(format!("KP initial segment is η_Y (d = 1), got d = {}", eta.dim())));
        }
        let (n_r, h) = (eta.n_delay(), eta.step());
        let mut data = Vec::with_capacity(2 * (n_r + 1));
        for k in 0..=n_r {
            let u = -T::from_usize_lossy(n_r - k) * h;
            let y = if k == n_r { eta.v()[0] } else { eta.phi(k)[0] };
            data.push(self.price_of(y, u));
            data.push(y);
        }
        Ok(Segment::from_raw(data, 2, n_r, h))
    }
    fn embed_direction(&self, eta: &Segment<T>, psi: &Segment<T>) -> Result<Segment<T>> {
        let state = self.embed(eta)?;
        if !psi.same_shape(eta) {
            return Err(Error::GridMismatch("direction shape differs from η_Y".into()));
        }
        let a2 = T::lit(self.alpha2);
        let d = state.data();
        let data = psi.data().iter().enumerate().flat_map(|(k, &p)| [a2 * d[2 * k] * p, p]).collect();
        Ok(Segment::from_raw(data, 2, eta.n_delay(), eta.step()))
    }
    /// Inverse of the `S` row only: `(1/(C₃S), 0)`.
    fn right_inverse(&self, t: T, _seg: SegmentView<'_, T>, g: &[T], out: &mut [T]) -> Result<()> {
        if g[0] == T::zero() || !g[0].is_finite() {
            return Err(Error::SingularVolatility { time: t.as_f64() });
        }
        out[0] = T::one() / g[0];
        out[1] = T::zero();
        Ok(())
    }
}
