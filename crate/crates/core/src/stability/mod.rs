//! Valuative side: log discrepancies, expected vanishing orders, stability
//! thresholds and non-archimedean energies of product valuations.

pub mod energy;
pub mod threshold;
pub mod valuation;

pub use energy::{
    antipode, gibbs_stability_check, lct_chain, min_cost_assignment, na_energy_per_particle,
    product_log_discrepancy, restriction_experiment, ChainEntry, LctChain, RestrictionRow, RestrictionTable,
    SectionBasis, StabilityCheck, Verdict,
};
pub use threshold::{
    curve_candidates, delta, delta_k, delta_k_with_radius, delta_with_radius, generic_point, toric_candidates,
    Threshold, DEFAULT_BOX_RADIUS,
};
pub use valuation::{
    basis_divisor, expected_vanishing, f_na, log_discrepancy, BasisDivisor, CurveValuation, NaSpace,
    ProductValuation, ToricValuation, Valuation, Vanishing,
};
