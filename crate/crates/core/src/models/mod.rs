//! Built-in market models.

mod ahmp;
mod bs;
mod geometric;
mod kp;

pub use ahmp::{ahmp_closed_path, ahmp_model, ahmp_variation_closed, Ahmp};
pub use bs::{bs_model, BlackScholes};
pub use geometric::{GeometricModel, LinearFunctional};
pub use kp::{kp_model, KuchlerPlaten};

pub(crate) fn lag_steps(r: f64, h: f64) -> usize {
    (r / h).round() as usize
}
