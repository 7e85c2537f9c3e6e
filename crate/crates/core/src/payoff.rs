//! Payoffs on the terminal segment of the traded asset.

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::segment::{Grid, SegmentView};

/// `Φ: M₂ → ℝ⁺`, evaluated on the scalar asset segment `S_T`.
#[derive(Clone, Debug, PartialEq)]
pub enum Payoff {
    /// `(S(T) − K)⁺`.
    EuropeanCall { strike: f64 },
    /// `((1/w)∫_{T−w}^T S(t)dt − K)⁺`, left-point quadrature, `w ≤ r`.
    AsianCall { strike: f64, window: f64 },
    /// `(max_{[T−r,T]} S − K)⁺`.
    LookbackCall { strike: f64 },
    /// `S(T)`.
    Terminal,
    /// `c`.
    Constant(f64),
}

impl Payoff {
    pub fn validate<T: Real>(&self, grid: &Grid<T>) -> Result<()> {
        if let Payoff::AsianCall { window, .. } = self {
            let h = grid.step().as_f64();
            let n = window / h;
            if !(*window > 0.0) || (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                return Err(invalid("window", format!("averaging window {window} must be a positive multiple of h = {h}")));
            }
            if n.round() as usize > grid.n_delay() {
                return Err(invalid("window", "averaging window longer than the delay r"));
            }
        }
        if let Payoff::LookbackCall { .. } = self {
            if grid.n_delay() == 0 {
                log::warn!("lookback payoff with r = 0 reduces to a European call");
            }
        }
        Ok(())
    }

    /// `Φ(seg)` for a scalar segment.
    pub fn eval<T: Real>(&self, seg: SegmentView<'_, T>) -> T {
        let v = seg.v()[0];
        match *self {
            Payoff::EuropeanCall { strike } => (v - T::lit(strike)).max(T::zero()),
            Payoff::AsianCall { strike, window } => {
                let n = (window / seg.step().as_f64()).round() as usize;
                let n_r = seg.n_delay();
                let sum = (n_r - n..n_r).fold(T::zero(), |a, k| a + seg.phi(k)[0]);
                (sum / T::from_usize_lossy(n) - T::lit(strike)).max(T::zero())
            }
            Payoff::LookbackCall { strike } => {
                let m = seg.data().iter().copied().fold(v, T::max);
                (m - T::lit(strike)).max(T::zero())
            }
            Payoff::Terminal => v,
            Payoff::Constant(c) => T::lit(c),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Payoff::EuropeanCall { .. } => "european_call",
            Payoff::AsianCall { .. } => "asian_call",
            Payoff::LookbackCall { .. } => "lookback_call",
            Payoff::Terminal => "terminal",
            Payoff::Constant(_) => "constant",
        }
    }
}
