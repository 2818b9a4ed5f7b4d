//! Grids, right-continuous step paths, risk bases and information delays.

mod basis;
mod delay;
mod grid;
mod path;

pub use basis::RiskBasis;
pub use delay::{
    apply_delay, make_refining_delays, verify_refining, Delay, DelayImage, DelayKind, DelayMap,
    RefiningReport,
};
pub use grid::{TimeGrid, TIME_TOL};
pub use path::StepPath;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("time {t} outside [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid delay: {0}")]
    InvalidDelay(String),
}

/// `X(s ∧ t)` for a single path.
pub fn stop(path: &StepPath, t: f64) -> Result<StepPath, PathError> {
    path.stop(t)
}

/// Each component stopped at its own time.
pub fn stop_multi(basis: &RiskBasis, times: &[f64]) -> Result<RiskBasis, PathError> {
    basis.stop_multi(times)
}

/// `inf{u >= 0 : τ(u) >= s}` with `+∞` when never attained.
pub fn delay_pseudo_inverse(map: &DelayMap, s: f64) -> f64 {
    map.pseudo_inverse(s)
}
