//! Kähler-Einstein metrics on log Fano curves: Gibbs ensembles, discrete
//! variational functionals and non-archimedean stability thresholds.

pub mod error;
pub mod ensemble;
pub mod geometry;
pub mod stability;
pub mod variational;

pub use error::{Error, Result};

/// Exact rational numbers used for weights, thresholds and toric data.
pub type Rational = num_rational::BigRational;
