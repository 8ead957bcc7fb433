//! Minimization of the free energy and its dual, and the coercivity scan.

use std::sync::Arc;

use serde::Serialize;

use super::discrete::{Density, Discretization, Potential};
use super::functionals::{ding, entropy, free_energy, script_energy};
use super::ke::{solve_ke_with, KeScheme};
use crate::geometry::{GridSpace, LogSphere, RadialGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Minimization {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final optimality measure (mass-weighted gradient variance, or dual gradient norm).
    pub stationarity: f64,
}

fn free_energy_gradient(mu: &Density, beta: f64) -> Result<Vec<f64>> {
    let d = mu.discretization();
    let u = d.solve_potential(&mu.masses())?;
    Ok(mu.values().iter().zip(&u).map(|(r, u)| r.max(1e-300).ln() - beta * u).collect())
}

fn weighted_variance(m: &[f64], g: &[f64]) -> f64 {
    let mean: f64 = m.iter().zip(g).map(|(a, b)| a * b).sum();
    m.iter().zip(g).map(|(a, b)| a * (b - mean).powi(2)).sum()
}

/// Mirror descent for `F_β` in the parametrization `μ ∝ e^{-v} dV`.
///
/// Each step multiplies the density by `exp(-η ∇F)`; `η` halves on failure to
/// decrease and grows by half on success.
pub fn minimize_free_energy(start: &Density, beta: f64, budget: usize, tol: f64) -> Result<(Density, Minimization)> {
    let d = start.discretization().clone();
    let mut mu = start.clone();
    let mut f = free_energy(&mu, beta)?;
    let mut eta = 0.5;
    let mut it = 0;
    let mut stat = f64::INFINITY;
    while it < budget {
        let g = free_energy_gradient(&mu, beta)?;
        stat = weighted_variance(&mu.masses(), &g);
        if stat < tol * tol {
            return Ok((mu, Minimization { value: f, iterations: it, converged: true, stationarity: stat.sqrt() }));
        }
        it += 1;
        let mut improved = false;
        for _ in 0..40 {
            let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
            let vals: Vec<f64> = mu.values().iter().zip(&g).map(|(r, gi)| r * (-eta * (gi - gmin)).exp()).collect();
            if let Ok(trial) = Density::normalized(&d, vals) {
                let ft = free_energy(&trial, beta)?;
                if ft < f {
                    mu = trial;
                    f = ft;
                    eta = (eta * 1.5).min(1.0);
                    improved = true;
                    break;
                }
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let converged = stat < tol * tol;
    Ok((mu, Minimization { value: f, iterations: it, converged, stationarity: stat.sqrt() }))
}

/// Minimizes `D_{-1}(u) = -𝓔(u) - log ∫ e^{-u} dV` over admissible potentials
/// with steps preconditioned by the inverse stiffness.
pub fn minimize_dual(start: &Potential, budget: usize, tol: f64) -> Result<(Potential, Minimization)> {
    let d = start.discretization().clone();
    let mut u = start.clone();
    let mut f = ding(&u, -1.0)?;
    let mut it = 0;
    let mut gnorm = f64::INFINITY;
    let mut eta = 1.0;
    while it < budget {
        // gradient -MA(u) + e^{-u}dV / Z, a mass-zero vector
        let m = d.ma_masses(u.values());
        let w = d.dv_masses();
        let lo = u.values().iter().copied().fold(f64::INFINITY, f64::min);
        let e: Vec<f64> = w.iter().zip(u.values()).map(|(w, v)| w * (lo - v).exp()).collect();
        let z: f64 = e.iter().sum();
        let grad: Vec<f64> = m.iter().zip(&e).map(|(a, b)| b / z - a).collect();
        gnorm = grad.iter().map(|x| x.abs()).sum();
        if gnorm < tol {
            return Ok((u, Minimization { value: f, iterations: it, converged: true, stationarity: gnorm }));
        }
        it += 1;
        // K s = V grad, i.e. solve_potential with masses m0 - grad
        let shifted: Vec<f64> = d.reference_ma_masses().iter().zip(&grad).map(|(a, g)| a - g).collect();
        let s = d.solve_potential(&shifted)?;
        let mut improved = false;
        for _ in 0..40 {
            let vals: Vec<f64> = u.values().iter().zip(&s).map(|(a, b)| a - eta * b).collect();
            let admissible = d.ma_masses(&vals).iter().all(|x| *x >= 0.0);
            if admissible {
                let trial = Potential::new(&d, vals)?;
                let ft = ding(&trial, -1.0)?;
                if ft < f {
                    u = trial;
                    f = ft;
                    eta = (eta * 1.5).min(1.0);
                    improved = true;
                    break;
                }
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((u, Minimization { value: f, iterations: it, converged: gnorm < tol, stationarity: gnorm }))
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub primal: Minimization,
    pub dual: Minimization,
    /// `|inf F_{-1} - inf D_{-1}|`.
    pub gap: f64,
    /// `-𝓔(u_KE)` and `Ent(μ_KE)` of the common witness.
    pub witness_script_energy: f64,
    pub witness_entropy: f64,
}

/// Compares `inf_μ F_{-1}(μ)` with `inf_u D_{-1}(u)` on the grid, using the
/// solution of `MA(u) = e^{-u} dV` as the common starting witness.
pub fn duality_gap(disc: &Arc<Discretization>) -> Result<DualityReport> {
    let ke = solve_ke_with(disc, -1.0, KeScheme::Lumped, &Potential::zero(disc))?;
    let (_, primal) = minimize_free_energy(&ke.density, -1.0, 500, 1e-10)?;
    let (_, dual) = minimize_dual(&ke.potential, 500, 1e-11)?;
    Ok(DualityReport {
        gap: (primal.value - dual.value).abs(),
        witness_script_energy: -script_energy(&ke.potential),
        witness_entropy: entropy(&ke.density, &Density::reference(disc))?,
        primal,
        dual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanConfig {
    /// Nodes of the coarse grid; the fine grid has `refine * (nodes - 1) + 1`.
    pub nodes: usize,
    pub refine: usize,
    /// Minima below this value count as divergence.
    pub floor: f64,
    /// Drop of the fine-grid minimum below the coarse-grid minimum that counts as a dive.
    pub dive_tolerance: f64,
    /// Mirror-descent iterations per β.
    pub budget: usize,
    /// Concentration scales `λ²` of the starting densities.
    pub scales: Vec<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            nodes: 101,
            refine: 4,
            floor: -1e3,
            dive_tolerance: 0.05,
            budget: 100,
            scales: (0..=12).map(|k| 10f64.powi(-k)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanEntry {
    pub beta: f64,
    /// `F_β` at the least concentrated start on the fine grid.
    pub unconcentrated: f64,
    pub min_coarse: f64,
    pub min_fine: f64,
    pub dives: bool,
}

/// Heuristic bracket for the coercivity threshold of `F_β` along decreasing β.
#[derive(Debug, Clone, Serialize)]
pub struct CoercivityScan {
    pub entries: Vec<ScanEntry>,
    pub last_stable: Option<f64>,
    pub first_dive: Option<f64>,
    /// Midpoint of the bracket when both ends exist.
    pub estimate: Option<f64>,
    pub bracket_width: Option<f64>,
    pub note: &'static str,
}

/// Push-forward of `dV` under `z ↦ λ z` as nodal values relative to `dV`:
/// `λ^{2(1-c_0)} (1 - t + λ² t)^{c_0 + c_1 - 2}`, concentrating at the south
/// pole as `λ → 0` and at the north pole as `λ → ∞`.
fn concentrated(space: &GridSpace, lambda_sq: f64) -> Vec<f64> {
    let (c0, c1) = space.pole_weights();
    let g = space.grid();
    g.nodes()
        .iter()
        .zip(g.co_nodes())
        .map(|(&t, &ct)| lambda_sq.powf(1.0 - c0) * (ct + lambda_sq * t).powf(c0 + c1 - 2.0))
        .collect()
}

fn scan_grid(space: &LogSphere, nodes: usize, beta: f64, cfg: &ScanConfig) -> Result<(f64, f64)> {
    let gs = GridSpace::new(space, RadialGrid::for_space(space, nodes)?)?;
    let d = Discretization::new(gs.clone());
    let mut best: Option<(f64, Density)> = None;
    let mut unconcentrated = f64::NAN;
    for &s in &cfg.scales {
        for lam in [s, 1.0 / s] {
            let vals = concentrated(&gs, lam);
            let Ok(mu) = Density::normalized(&d, vals) else { continue };
            let f = free_energy(&mu, beta)?;
            if s == 1.0 {
                unconcentrated = f;
            }
            if best.as_ref().is_none_or(|(b, _)| f < *b) {
                best = Some((f, mu));
            }
        }
    }
    let (_, start) = best.ok_or_else(|| Error::Internal("no valid starting density".into()))?;
    let (_, m) = minimize_free_energy(&start, beta, cfg.budget, 1e-9)?;
    Ok((unconcentrated, m.value))
}

/// Runs a bounded-budget minimization of `F_β` for each β of a decreasing grid
/// of negative values and brackets the first β at which the minimum dives.
/// This is a heuristic: a finite grid keeps every `F_β` bounded below.
pub fn coercivity_scan(space: &LogSphere, betas: &[f64], cfg: &ScanConfig) -> Result<CoercivityScan> {
    if space.pole_weights().is_none() {
        return Err(Error::InvalidInput("coercivity scan needs log points at the poles only".into()));
    }
    if betas.iter().any(|b| *b >= 0.0) || betas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("beta grid must be negative and strictly decreasing".into()));
    }
    let mut entries = Vec::new();
    let fine_nodes = cfg.refine * (cfg.nodes - 1) + 1;
    for &beta in betas {
        let (_, min_coarse) = scan_grid(space, cfg.nodes, beta, cfg)?;
        let (unconcentrated, min_fine) = scan_grid(space, fine_nodes, beta, cfg)?;
        // grid minima stay bounded for every β; only growth under refinement signals divergence
        let dives = min_fine < cfg.floor || min_fine < min_coarse - cfg.dive_tolerance;
        entries.push(ScanEntry { beta, unconcentrated, min_coarse, min_fine, dives });
    }
    let first = entries.iter().position(|e| e.dives);
    let last_stable = match first {
        Some(0) => None,
        Some(i) => Some(entries[i - 1].beta),
        None => entries.last().map(|e| e.beta),
    };
    let first_dive = first.map(|i| entries[i].beta);
    let (estimate, bracket_width) = match (last_stable, first_dive) {
        (Some(a), Some(b)) => (Some(0.5 * (a + b)), Some(a - b)),
        _ => (None, None),
    };
    Ok(CoercivityScan {
        entries,
        last_stable,
        first_dive,
        estimate,
        bracket_width,
        note: "heuristic: grid minima are always finite; a dive is a drop of the minimum under grid refinement",
    })
}
