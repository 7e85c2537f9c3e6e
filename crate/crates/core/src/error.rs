use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid incompatibility: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("evaluation at u = {u} is not on the segment grid (h = {h}, r = {r})")]
    OffGrid { u: f64, h: f64, r: f64 },

    #[error("numerical blow-up at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    #[error("{rejected} of {total} paths rejected, above the 0.1% budget")]
    RejectBudget { rejected: usize, total: usize },

    #[error("singular volatility at t = {time}")]
    SingularVolatility { time: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("direction family is not M2-orthonormal: {0}")]
    NotOrthonormal(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
