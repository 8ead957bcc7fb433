//! Log pairs on the Riemann sphere, radial grids and toric Fano data.

pub mod gauss;
pub mod grid;
pub mod sphere;
pub mod toric;

pub use grid::{quadrature, reference_density, Chart, GridSpace, RadialGrid, ReferenceDensity};
pub use sphere::{chord_sq, log_pair_mass, LogPoint, LogSphere, ReferenceData, SpherePoint};
pub use toric::{lattice_points, Facet, ToricFano};
