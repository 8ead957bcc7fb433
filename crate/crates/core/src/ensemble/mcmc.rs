//! Metropolis sampling of the Gibbs measure `e^{-β N E^(N)} dV^{⊗N} / Z_N(β)`.
//!
//! Each sweep proposes one move per particle. A move draws an isotropic
//! Gaussian vector in the tangent plane and follows the great circle it
//! defines (exponential map), which is a symmetric proposal on the sphere.
//! During burn-in the step size is adapted toward an acceptance rate of 0.3;
//! afterwards it is frozen so the retained chain is a proper Metropolis chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::histogram::{HistogramDensity, Partition};
use super::slater::{pair_log_sum, BasisSpec, Configuration};
use crate::geometry::{chord_sq, LogSphere, ReferenceData};
use crate::{Error, Result};

const TARGET_ACCEPTANCE: f64 = 0.3;
const MAX_SCALE: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsParams {
    pub beta: f64,
    pub sweeps: usize,
    pub burn_in: usize,
    pub proposal_scale: f64,
    pub seed: u64,
    pub chains: usize,
    /// Histogram and snapshot statistics use every `thin`-th sweep after burn-in.
    pub thin: usize,
    pub partition: Partition,
    pub autotune: bool,
    /// For `β < 0`, the run aborts when `E^(N)` exceeds this value: attraction
    /// that outgrows the reference measure collapses particles and drives the
    /// energy to `+inf`.
    pub energy_ceiling: f64,
}

impl Default for GibbsParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            sweeps: 2000,
            burn_in: 200,
            proposal_scale: 0.5,
            seed: 0,
            chains: 1,
            thin: 1,
            partition: Partition::default(),
            autotune: true,
            energy_ceiling: 50.0,
        }
    }
}

impl GibbsParams {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::InvalidInput("beta must be finite".into()));
        }
        if !(self.proposal_scale > 0.0) {
            return Err(Error::InvalidInput("proposal_scale must be positive".into()));
        }
        if self.sweeps <= self.burn_in {
            return Err(Error::InvalidInput(format!(
                "sweeps ({}) must exceed burn_in ({})",
                self.sweeps, self.burn_in
            )));
        }
        if self.chains == 0 || self.thin == 0 {
            return Err(Error::InvalidInput("chains and thin must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub partition: Partition,
    /// Cell counts, band-major.
    pub histogram: Vec<u64>,
    pub acceptance_rate: f64,
    /// `E^(N)` after every post-burn-in sweep, chains concatenated in index order.
    pub energy_trace: Vec<f64>,
    pub chain_traces: Vec<Vec<f64>>,
    pub autocorrelation_time: f64,
    pub retained_sweeps: usize,
    pub n_particles: usize,
    /// Tuned step sizes per chain.
    pub proposal_scales: Vec<f64>,
    /// Set for `β < 0`: results are only meaningful if `Z_N(β) < ∞`.
    pub conditional_on_finite_z: bool,
}

impl EmpiricalStats {
    pub fn mean_energy(&self) -> f64 {
        self.energy_trace.iter().sum::<f64>() / self.energy_trace.len() as f64
    }

    /// Standard error of the mean energy by batch means within each chain.
    pub fn energy_standard_error(&self) -> f64 {
        let per_chain: Vec<(f64, f64)> = self.chain_traces.iter().map(|t| batch_means(t)).collect();
        let c = per_chain.len() as f64;
        (per_chain.iter().map(|(_, v)| v).sum::<f64>()).sqrt() / c
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleOutput {
    pub stats: EmpiricalStats,
    /// Final configuration of every chain.
    pub snapshots: Vec<Configuration>,
}

/// Density estimate of the one-point marginal on the histogram partition.
pub fn empirical_density(stats: &EmpiricalStats) -> Result<HistogramDensity> {
    HistogramDensity::from_counts(stats.partition, &stats.histogram)
}

/// Runs `params.chains` independent chains and merges them by chain index.
pub fn mcmc_sample(space: &LogSphere, basis: &BasisSpec, params: &GibbsParams) -> Result<SampleOutput> {
    params.validate()?;
    let reference = ReferenceData::new(space, basis.degree());
    let results: Vec<Result<ChainResult>> = (0..params.chains)
        .into_par_iter()
        .map(|c| run_chain(&reference, basis, params, c as u64))
        .collect();
    let mut chains = Vec::with_capacity(results.len());
    for r in results {
        chains.push(r?);
    }
    let cells = params.partition.cells();
    let mut histogram = vec![0u64; cells];
    let mut energy_trace = Vec::new();
    let mut chain_traces = Vec::new();
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    let mut retained = 0;
    let mut snapshots = Vec::new();
    let mut scales = Vec::new();
    let mut taus = Vec::new();
    for ch in chains {
        for (h, c) in histogram.iter_mut().zip(&ch.histogram) {
            *h += c;
        }
        energy_trace.extend_from_slice(&ch.trace);
        taus.push(integrated_autocorrelation_time(&ch.trace));
        chain_traces.push(ch.trace);
        accepted += ch.accepted;
        proposed += ch.proposed;
        retained += ch.retained;
        snapshots.push(ch.snapshot);
        scales.push(ch.scale);
    }
    let stats = EmpiricalStats {
        partition: params.partition,
        histogram,
        acceptance_rate: accepted as f64 / proposed.max(1) as f64,
        energy_trace,
        chain_traces,
        autocorrelation_time: taus.iter().sum::<f64>() / taus.len() as f64,
        retained_sweeps: retained,
        n_particles: basis.n_particles(),
        proposal_scales: scales,
        conditional_on_finite_z: params.beta < 0.0,
    };
    Ok(SampleOutput { stats, snapshots })
}

struct ChainResult {
    histogram: Vec<u64>,
    trace: Vec<f64>,
    accepted: u64,
    proposed: u64,
    retained: usize,
    snapshot: Configuration,
    scale: f64,
}

pub(crate) fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Geodesic step from `x` along a Gaussian tangent vector of standard deviation `scale`.
fn propose<R: Rng>(rng: &mut R, x: &[f64; 3], scale: f64) -> [f64; 3] {
    // orthonormal tangent frame at x
    let helper = if x[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = helper[0] * x[0] + helper[1] * x[1] + helper[2] * x[2];
    let mut e1 = [helper[0] - d * x[0], helper[1] - d * x[1], helper[2] - d * x[2]];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|v| *v /= n1);
    let e2 = [x[1] * e1[2] - x[2] * e1[1], x[2] * e1[0] - x[0] * e1[2], x[0] * e1[1] - x[1] * e1[0]];
    let g1: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
    let g2: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
    let r = (g1 * g1 + g2 * g2).sqrt();
    if r == 0.0 {
        return *x;
    }
    let (s, c) = r.sin_cos();
    let mut y = [0.0; 3];
    for i in 0..3 {
        y[i] = c * x[i] + s * (g1 * e1[i] + g2 * e2[i]) / r;
    }
    let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    [y[0] / n, y[1] / n, y[2] / n]
}

fn run_chain(reference: &ReferenceData, basis: &BasisSpec, params: &GibbsParams, chain: u64) -> Result<ChainResult> {
    let mut rng = chain_rng(params.seed, chain);
    let n = basis.n_particles();
    let k = basis.level() as f64;
    let coupling = params.beta / k;
    let energy_scale = -1.0 / (k * n as f64);
    let mut pts: Vec<[f64; 3]> = (0..n).map(|_| random_unit(&mut rng)).collect();
    let mut log_rho: Vec<f64> = pts.iter().map(|x| reference.log_density(x)).collect();
    let mut scale = params.proposal_scale.min(MAX_SCALE);
    let cells = params.partition.cells();
    let mut histogram = vec![0u64; cells];
    let mut trace = Vec::with_capacity(params.sweeps - params.burn_in);
    let (mut accepted, mut proposed, mut retained) = (0u64, 0u64, 0usize);

    for sweep in 0..params.sweeps {
        let mut acc_sweep = 0usize;
        for i in 0..n {
            let y = propose(&mut rng, &pts[i], scale);
            let mut delta_pairs = 0.0;
            for (j, p) in pts.iter().enumerate() {
                if j != i {
                    delta_pairs += chord_sq(&y, p).ln() - chord_sq(&pts[i], p).ln();
                }
            }
            let lr = reference.log_density(&y);
            let interaction = if n > 1 && coupling != 0.0 { coupling * delta_pairs } else { 0.0 };
            let log_ratio = interaction + lr - log_rho[i];
            let u: f64 = rng.random();
            let accept = if log_ratio.is_nan() {
                false
            } else {
                log_ratio >= 0.0 || u.ln() < log_ratio
            };
            if accept {
                pts[i] = y;
                log_rho[i] = lr;
                acc_sweep += 1;
            }
        }
        let energy = energy_scale * pair_log_sum(&pts);
        if params.beta < 0.0 && !(energy <= params.energy_ceiling) {
            return Err(Error::Instability(format!(
                "chain {chain}: E^(N) = {energy:.3e} exceeded {} at sweep {sweep}",
                params.energy_ceiling
            )));
        }
        if sweep < params.burn_in {
            if params.autotune {
                let rate = acc_sweep as f64 / n as f64;
                let gain = 1.0 / ((sweep + 1) as f64).sqrt();
                scale = (scale * (gain * (rate - TARGET_ACCEPTANCE)).exp()).clamp(1e-6, MAX_SCALE);
            }
            continue;
        }
        accepted += acc_sweep as u64;
        proposed += n as u64;
        if !energy.is_finite() {
            return Err(Error::Internal(format!("non-finite energy retained at sweep {sweep}")));
        }
        trace.push(energy);
        if (sweep - params.burn_in) % params.thin == 0 {
            retained += 1;
            for x in &pts {
                histogram[params.partition.cell(x)] += 1;
            }
        }
    }
    Ok(ChainResult {
        histogram,
        trace,
        accepted,
        proposed,
        retained,
        snapshot: Configuration { points: pts },
        scale,
    })
}

/// `(mean, variance of the mean)` by non-overlapping batches of size `~sqrt(n)`.
pub fn batch_means(trace: &[f64]) -> (f64, f64) {
    let n = trace.len();
    let mean = trace.iter().sum::<f64>() / n as f64;
    let b = ((n as f64).sqrt() as usize).max(1);
    let nb = n / b;
    if nb < 2 {
        return (mean, f64::INFINITY);
    }
    let batches: Vec<f64> = (0..nb).map(|i| trace[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64).collect();
    let bm = batches.iter().sum::<f64>() / nb as f64;
    let var = batches.iter().map(|x| (x - bm) * (x - bm)).sum::<f64>() / (nb - 1) as f64;
    (mean, var / nb as f64)
}

/// Integrated autocorrelation time with the self-consistent window `M >= 5 τ`.
pub fn integrated_autocorrelation_time(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 4 {
        return 1.0;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let c0 = trace.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c = (0..n - lag).map(|i| (trace[i] - mean) * (trace[i + lag] - mean)).sum::<f64>() / n as f64;
        tau += 2.0 * c / c0;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::slater::BasisSign;

    fn small(beta: f64, seed: u64, chains: usize) -> GibbsParams {
        GibbsParams {
            beta,
            sweeps: 300,
            burn_in: 50,
            seed,
            chains,
            partition: Partition::new(4, 4).unwrap(),
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let b = BasisSpec::monomial(2, 4, BasisSign::Anticanonical).unwrap();
        let s = LogSphere::round();
        let a = mcmc_sample(&s, &b, &small(1.0, 42, 2)).unwrap();
        let c = mcmc_sample(&s, &b, &small(1.0, 42, 2)).unwrap();
        assert_eq!(a.stats, c.stats);
        let d = mcmc_sample(&s, &b, &small(1.0, 43, 2)).unwrap();
        assert_ne!(a.stats.energy_trace, d.stats.energy_trace);
    }

    #[test]
    fn histogram_mass_matches_retained_sweeps() {
        let b = BasisSpec::monomial(1, 5, BasisSign::Anticanonical).unwrap();
        let mut p = small(0.5, 1, 3);
        p.thin = 7;
        let out = mcmc_sample(&LogSphere::round(), &b, &p).unwrap();
        let total: u64 = out.stats.histogram.iter().sum();
        assert_eq!(total as usize, out.stats.retained_sweeps * 6);
        assert_eq!(out.stats.retained_sweeps, 3 * 250usize.div_ceil(7));
        assert!(out.stats.acceptance_rate > 0.05 && out.stats.acceptance_rate < 0.95);
        assert!(out.stats.energy_trace.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn rejects_bad_params() {
        let b = BasisSpec::monomial(1, 1, BasisSign::Anticanonical).unwrap();
        let mut p = small(1.0, 0, 1);
        p.burn_in = p.sweeps;
        assert!(mcmc_sample(&LogSphere::round(), &b, &p).is_err());
        let mut p = small(1.0, 0, 1);
        p.proposal_scale = 0.0;
        assert!(mcmc_sample(&LogSphere::round(), &b, &p).is_err());
    }

    #[test]
    fn runaway_attraction_aborts() {
        // β/k = -3 makes Z_2 infinite: the pair collapses
        let b = BasisSpec::monomial(1, 1, BasisSign::Anticanonical).unwrap();
        let mut p = small(-3.0, 5, 1);
        p.sweeps = 20000;
        p.energy_ceiling = 5.0;
        let err = mcmc_sample(&LogSphere::round(), &b, &p).unwrap_err();
        assert!(err.to_string().contains("instability: possible Z divergence"));
    }

    #[test]
    fn autocorrelation_of_white_noise_is_near_one() {
        let mut rng = chain_rng(9, 0);
        let x: Vec<f64> = (0..20000).map(|_| rng.sample(StandardNormal)).collect();
        let tau = integrated_autocorrelation_time(&x);
        assert!((tau - 1.0).abs() < 0.2, "tau = {tau}");
        let (m, v) = batch_means(&x);
        assert!(m.abs() < 0.05 && (v.sqrt() - 1.0 / 20000f64.sqrt()).abs() < 0.004);
    }
}
