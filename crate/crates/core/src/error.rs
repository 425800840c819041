use thiserror::Error;

/// Errors raised by the numerical routines and the experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("point lies outside the chart domain (|y'|^2 = {norm_sq:.6e}, limit {limit:.6e})")]
    OutsideChart { norm_sq: f64, limit: f64 },

    #[error("point is not on the unit sphere (|y| - 1 = {deviation:.3e})")]
    NotOnSphere { deviation: f64 },

    #[error("root finding failed for zero pattern {pattern:?}: {reason}")]
    RootFinding { pattern: Vec<bool>, reason: String },

    #[error("|lambda| = {magnitude:.6e} exceeds the configured cap {cap:.6e}")]
    MagnitudeCap { magnitude: f64, cap: f64 },

    #[error("quadrature did not reach tolerance (last estimate {estimate:.3e}) within {nodes} nodes")]
    NotConverged { estimate: f64, nodes: usize },

    #[error("oscillation budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("exponent {p} outside admissible range ({lo}, {hi})")]
    RangeViolation { p: f64, lo: f64, hi: f64 },

    #[error("critical set for chart {chart} is not certified complete")]
    IncompleteSet { chart: String },

    #[error("critical point is not of kind II")]
    NotKindII,

    #[error("evaluation point outside the configured box (half-width {half_width})")]
    OutsideBox { half_width: f64 },

    #[error("degenerate critical point without a finite axis order at {point:?}")]
    UndeterminedOrder { point: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures caused by numerical non-convergence rather than bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::RootFinding { .. }
                | Error::NotConverged { .. }
                | Error::BudgetExceeded(_)
                | Error::IncompleteSet { .. }
                | Error::UndeterminedOrder { .. }
        )
    }
}
