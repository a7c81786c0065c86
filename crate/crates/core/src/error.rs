use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("norm order {requested} exceeds the safe order {max}")]
    UnsafeOrder { requested: usize, max: usize },

    #[error("frequency {frequency} is not resolved by {n_points} points (need n_points >= {required})")]
    Unresolved {
        frequency: u32,
        n_points: usize,
        required: usize,
    },

    #[error("target outside the admissible neighbourhood: ||T - T0||_0 = {measured:.6e} >= {radius:.6e}")]
    Neighbourhood { measured: f64, radius: f64 },

    #[error("domain escape before step {step}: ||T - r - T0||_0 = {distance:.6e} >= {radius:.6e}")]
    DomainEscape {
        step: usize,
        distance: f64,
        radius: f64,
    },

    #[error("derivative budget exhausted at step {step}: {available} orders available, {required} required")]
    DerivativeBudgetExhausted {
        step: usize,
        available: i64,
        required: usize,
    },

    #[error("insufficient steps for a fit: {usable} usable, {required} required")]
    InsufficientSteps { usable: usize, required: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
