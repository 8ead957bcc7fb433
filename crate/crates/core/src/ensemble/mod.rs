//! Canonical N-particle ensembles on the Riemann sphere.

pub mod histogram;
pub mod mcmc;
pub mod partition;
pub mod slater;

pub use histogram::{total_variation, HistogramDensity, Partition};
pub use mcmc::{empirical_density, mcmc_sample, EmpiricalStats, GibbsParams, SampleOutput};
pub use partition::{brute_force_log_partition, log_partition, BruteForceResult, PartitionEstimate};
pub use slater::{energy_per_particle, slater_log_norm, BasisSign, BasisSpec, Configuration};
