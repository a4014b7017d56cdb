use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("region outside grid: {0}")]
    RegionOutsideGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("applied field violates |B0| + |grad B0| > 0 (min {min:.3e} at ({x:.4}, {y:.4}))")]
    DegenerateField { min: f64, x: f64, y: f64 },
    #[error("linear solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    LinearSolve { residual: f64, iterations: usize },
    #[error("periodic cell needs R^2 in 2*pi*Z, got R^2/(2 pi) = {0}")]
    InvalidPeriodicSize(f64),
    #[error("grid too coarse: h = {h:.3e} exceeds {limit:.3e} (magnetic length not resolved)")]
    Resolution { h: f64, limit: f64 },
    #[error("loop passes through a zero of the order parameter at node ({0}, {1})")]
    ZeroOnLoop(usize, usize),
    #[error("f-hat table: {0}")]
    Table(String),
    #[error("schedule degenerate: {0}")]
    Schedule(String),
    #[error("field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
