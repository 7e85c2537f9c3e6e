//! Monte Carlo pricing and initial-segment deltas for stochastic functional
//! differential equations (SDEs whose coefficients depend on a window of the past).
//!
//! The state lives in the discretized space `M₂ = ℝᵈ × L²([-r,0], ℝᵈ)`
//! ([`segment`]). Paths come from an Euler–Maruyama solver ([`engine`]); its
//! forward-mode derivatives give first-variation flows and the Malliavin tangent
//! ([`variation`]). [`greeks`] turns those into Malliavin-weight delta estimators
//! under plain, risk-neutral and growth-optimal-portfolio valuation, with a
//! common-random-number finite-difference oracle alongside.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod greeks;
pub mod mc;
pub mod measures;
pub mod model;
pub mod models;
pub mod noise;
pub mod payoff;
pub mod scalar;
pub mod segment;
pub mod variation;

pub use engine::{euler_solve, euler_solve_from, simulate, simulate_from, Stepping, Trajectory};
pub use error::{Error, Result};
pub use greeks::{
    delta_batch, delta_benchmark, delta_fd, delta_index, delta_plain, delta_risk_neutral, fd_sweep, price,
    DeltaBatch, DeltaOptions, DeltaReport, FdEstimate, FdSweep, Integrand, Problem, RnMode, Valuation, WeightFn,
};
pub use mc::{run_paths, Estimate, McParams};
pub use measures::{
    benchmarked_martingale_diag, dtheta, market_price_of_risk, simulate_measures, MeasurePath, RiskNeutral,
};
pub use model::{Component, Model, TimeFn};
pub use noise::{generate_noise, Noise};
pub use payoff::Payoff;
pub use scalar::Real;
pub use segment::{
    direction_dictionary, m2_inner, m2_norm, segment_of_path, Direction, DirectionKind, Grid, InitialShape, Path,
    Segment, SegmentView,
};
pub use variation::{
    check_flow_malliavin_bridge, malliavin_tangent, tangent_column, variation_flow, variation_flow_from,
    TangentMatrix, VariationPath,
};

/// `(v, φ)` on the grid, double precision.
pub type SegmentGrid = Segment<f64>;
/// Solution path on `[-r, T]`, double precision.
pub type PathGrid = Path<f64>;
/// Brownian increments of one path, double precision.
pub type NoiseGrid = Noise<f64>;
/// Time grid, double precision.
pub type TimeGrid = Grid<f64>;
/// Single-precision segment.
pub type SegmentGrid32 = Segment<f32>;
/// Single-precision path.
pub type PathGrid32 = Path<f32>;
