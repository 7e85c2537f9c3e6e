use crate::error::{invalid, Result};
use crate::model::{Component, Model, TimeFn};
use crate::scalar::Real;
use crate::segment::SegmentView;

/// `dS = μS dt + σS dW`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlackScholes {
    pub mu: f64,
    pub sigma: f64,
    pub rate: TimeFn,
}

pub fn bs_model(mu: f64, sigma: f64, rate: TimeFn) -> Result<BlackScholes> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid("sigma", format!("must be positive, got {sigma}")));
    }
    if !mu.is_finite() {
        return Err(invalid("mu", "must be finite"));
    }
    Ok(BlackScholes { mu, sigma, rate })
}

impl<T: Real> Model<T> for BlackScholes {
    fn name(&self) -> &str {
        "bs"
    }
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn delay(&self) -> f64 {
        0.0
    }
    fn component(&self, _i: usize) -> Component {
        Component::Geometric
    }
    fn coefficients(&self, _t: T, _seg: SegmentView<'_, T>, mu: &mut [T], sigma: &mut [T]) {
        mu[0] = T::lit(self.mu);
        sigma[0] = T::lit(self.sigma);
    }
    fn coefficient_derivatives(
        &self,
        _t: T,
        _seg: SegmentView<'_, T>,
        _dir: SegmentView<'_, T>,
        dmu: &mut [T],
        dsigma: &mut [T],
    ) {
        dmu[0] = T::zero();
        dsigma[0] = T::zero();
    }
    fn rate(&self) -> &TimeFn {
        &self.rate
    }
    fn theta_state_independent(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ddiffusion, diffusion, diffusion_right_inverse, drift};
    use crate::segment::{Grid, Segment};

    #[test]
    fn coefficients_in_full_form() {
        let m = bs_model(0.1, 0.2, TimeFn::Constant(0.05)).unwrap();
        let g = Grid::<f64>::new(0.5, 1.0, 0.125).unwrap();
        let mut s = Segment::scalar_fn(&g, |_| 3.0);
        s.v_mut()[0] = 100.0;
        assert!((drift::<f64, _>(&m, 0.0, s.view())[0] - 10.0).abs() < 1e-12);
        s.v_mut()[0] = 37.0;
        let gi = diffusion_right_inverse::<f64, _>(&m, 0.0, s.view()).unwrap()[0];
        assert!((diffusion::<f64, _>(&m, 0.0, s.view())[0] * gi - 1.0).abs() < 1e-14);
        let mut psi = Segment::scalar_fn(&g, |u| u + 1.0);
        psi.v_mut()[0] = 0.0;
        assert_eq!(ddiffusion::<f64, _>(&m, 0.0, s.view(), psi.view())[0], 0.0);
        psi.v_mut()[0] = 2.0;
        assert!((ddiffusion::<f64, _>(&m, 0.0, s.view(), psi.view())[0] - 0.4).abs() < 1e-15);
        assert!(bs_model(0.1, 0.0, TimeFn::Constant(0.0)).is_err());
    }
}
