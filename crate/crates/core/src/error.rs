use thiserror::Error;

/// Errors raised by the numerical and exact-arithmetic routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A log-pair weight outside the open interval (0, 1).
    #[error("non-klt pair: weight {0} must lie strictly between 0 and 1")]
    NonKlt(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("NaN encountered in {0}")]
    NotANumber(String),

    /// Monge-Ampere density of a potential fell below the admissibility tolerance.
    #[error("inadmissible potential: Monge-Ampere mass {value:e} at node {node}")]
    Inadmissible { node: usize, value: f64 },

    #[error("no solution found (possible non-existence for this beta): {0}")]
    NoSolution(String),

    #[error("instability: possible Z divergence ({0})")]
    Instability(String),

    #[error("oracle only: {0}")]
    OracleOnly(String),

    #[error("unhealthy chain at beta' = {beta}: {reason}")]
    UnhealthyLeg { beta: f64, reason: String },

    #[error("non-reflexive polytope: {0}")]
    NonReflexive(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
