//! Monge-Ampere operator, energy and entropy functionals, their Legendre duals
//! and the twisted Kähler-Einstein equation for rotation-invariant potentials.

pub mod discrete;
pub mod functionals;
pub mod ke;
pub mod minimize;

pub use discrete::{monge_ampere, solve_calabi_yau, solve_tridiagonal, Density, Discretization, Potential};
pub use functionals::{
    ding, energy_of_measure, ent_star, entropy, free_energy, mabuchi, script_energy, FunctionalReport,
};
pub use ke::{solve_ke, solve_ke_with, KeScheme, KeSolution, NewtonStep};
pub use minimize::{
    coercivity_scan, duality_gap, minimize_dual, minimize_free_energy, CoercivityScan, DualityReport,
    Minimization, ScanConfig, ScanEntry,
};
