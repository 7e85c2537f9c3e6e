#![allow(dead_code)]

use sfde_core::models::{ahmp_model, bs_model, kp_model, Ahmp, BlackScholes, KuchlerPlaten};
use sfde_core::{Grid, InitialShape, Segment, TimeFn};
use statrs::distribution::{ContinuousCDF, Normal};

pub const MU: f64 = 0.1;
pub const SIGMA: f64 = 0.2;
pub const KAPPA: f64 = 0.05;
pub const S0: f64 = 100.0;
pub const R: f64 = 0.5;
pub const T: f64 = 1.0;

pub fn norm_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Black–Scholes delta `N(d₁)` with drift `rate`, times `e^{(rate−κ)T}` for the plain measure.
pub fn bs_call_delta(s0: f64, k: f64, sigma: f64, rate: f64, t: f64) -> f64 {
    let d1 = ((s0 / k).ln() + (rate + 0.5 * sigma * sigma) * t) / (sigma * t.sqrt());
    norm_cdf(d1)
}

pub fn bs_call_price(s0: f64, k: f64, sigma: f64, rate: f64, t: f64) -> f64 {
    let d1 = ((s0 / k).ln() + (rate + 0.5 * sigma * sigma) * t) / (sigma * t.sqrt());
    let d2 = d1 - sigma * t.sqrt();
    s0 * norm_cdf(d1) - k * (-rate * t).exp() * norm_cdf(d2)
}

pub fn grid(p: i32) -> Grid<f64> {
    Grid::new(R, T, 2f64.powi(-p)).unwrap()
}

pub fn bs() -> BlackScholes {
    bs_model(MU, SIGMA, TimeFn::Constant(KAPPA)).unwrap()
}

pub fn kp() -> KuchlerPlaten {
    kp_model(1.0, 1.0, 0.1 * S0.ln() + 0.05, 0.1, SIGMA, R, TimeFn::Constant(KAPPA)).unwrap()
}

pub fn ahmp() -> Ahmp {
    ahmp_model(TimeFn::Constant(0.001), TimeFn::Constant(SIGMA), R, TimeFn::Constant(KAPPA)).unwrap()
}

pub fn eta_flat(g: &Grid<f64>) -> Segment<f64> {
    InitialShape::Constant(S0).sample(g)
}

/// Slightly varying history so that history directions matter.
pub fn eta_ahmp(g: &Grid<f64>) -> Segment<f64> {
    InitialShape::Linear { at_zero: S0, slope: 10.0 }.sample(g)
}

pub fn eta_kp(g: &Grid<f64>) -> Segment<f64> {
    InitialShape::Constant(S0.ln()).sample(g)
}

pub fn point(g: &Grid<f64>, d: usize) -> Segment<f64> {
    let mut s = Segment::zeros(d, g.n_delay(), g.step());
    s.v_mut()[0] = 1.0;
    s
}
