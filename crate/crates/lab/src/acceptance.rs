//! Cross-module acceptance criteria A1-A10.
//!
//! Every criterion returns a [`CriterionResult`] with the measured quantities
//! and the thresholds they were compared against. The thresholds are public
//! constants so that tests can pin them.

use std::sync::Arc;
use std::time::Instant;

use kelab_core::ensemble::histogram::{grid_cell_probabilities, reference_cell_probabilities};
use kelab_core::ensemble::{
    brute_force_log_partition, empirical_density, log_partition, mcmc_sample, total_variation, BasisSign, BasisSpec,
    GibbsParams, Partition,
};
use kelab_core::geometry::{LogPoint, LogSphere, SpherePoint};
use kelab_core::stability::{
    delta, delta_k, gibbs_stability_check, lct_chain, restriction_experiment, CurveValuation, NaSpace, Valuation,
    Verdict,
};
use kelab_core::variational::discrete::admissible_scaling;
use kelab_core::variational::{
    ding, duality_gap, energy_of_measure, entropy, mabuchi, monge_ampere, script_energy, solve_ke, Density,
    Discretization, Potential,
};
use kelab_core::Rational;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::format::ratio;

pub const A1_STDERR_MULTIPLE: f64 = 3.0;
pub const A1_RELATIVE_TOL: f64 = 0.01;
pub const A2_MIN_P_VALUE: f64 = 0.01;
pub const A3_OSCILLATION_TOL: f64 = 1e-8;
pub const A3_RESIDUAL_TOL: f64 = 1e-10;
pub const A3_RECONSTRUCTION_TOL: f64 = 1e-8;
pub const A4_RELATIVE_TOL: f64 = 1e-4;
pub const A5_TV_TOL: f64 = 0.1;
pub const A6_TV_TOL: f64 = 0.15;
pub const A10_DUALITY_TOL: f64 = 1e-6;
pub const A10_VIOLATION_TOL: f64 = 1e-12;
pub const A10_DERIVATIVE_TOL: f64 = 1e-6;
pub const A10_SAMPLES: usize = 100;

pub const CRITERIA: [&str; 10] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub title: String,
    pub passed: bool,
    /// Criteria whose subject is an open conjecture are run and reported but flagged.
    pub experimental: bool,
    pub summary: String,
    pub details: serde_json::Value,
    pub seconds: f64,
}

impl CriterionResult {
    /// One-line `PASS`/`FAIL` rendering.
    pub fn line(&self) -> String {
        format!(
            "{:<4} {} {}{} ({:.1}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            if self.experimental { " [experimental]" } else { "" },
            self.seconds,
            self.summary
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
}

/// Runs the named criteria (all when `only` is empty) with base seed `seed`.
pub fn run_suite(seed: u64, only: &[String]) -> Result<AcceptanceReport, String> {
    for id in only {
        if !CRITERIA.contains(&id.as_str()) {
            return Err(format!("unknown acceptance criterion {id}"));
        }
    }
    let criteria: Vec<CriterionResult> = CRITERIA
        .iter()
        .filter(|id| only.is_empty() || only.iter().any(|o| o == *id))
        .map(|id| run_criterion(id, seed))
        .collect();
    Ok(AcceptanceReport { seed, passed: criteria.iter().all(|c| c.passed), criteria })
}

pub fn run_criterion(id: &str, seed: u64) -> CriterionResult {
    let start = Instant::now();
    let (title, experimental, outcome) = match id {
        "A1" => ("Gibbs variational principle", false, a1(seed)),
        "A2" => ("beta=0 Sanov baseline", false, a2(seed)),
        "A3" => ("round-sphere KE", false, a3()),
        "A4" => ("football closed form", false, a4()),
        "A5" => ("sampler vs KE at beta=+1", false, a5(seed)),
        "A6" => ("Fano-side convergence at beta=-1", true, a6(seed)),
        "A7" => ("delta_k exactness", false, a7()),
        "A8" => ("NA energy convergence", false, a8()),
        "A9" => ("lct chain ordering", false, a9()),
        "A10" => ("duality and inequality suite", false, a10(seed)),
        _ => ("unknown", false, Err(format!("unknown criterion {id}"))),
    };
    let (passed, summary, details) = match outcome {
        Ok(o) => (o.passed, o.summary, o.details),
        Err(e) => (false, format!("error: {e}"), json!({ "error": e })),
    };
    CriterionResult {
        id: id.to_string(),
        title: title.to_string(),
        passed,
        experimental,
        summary,
        details,
        seconds: start.elapsed().as_secs_f64(),
    }
}

struct Outcome {
    passed: bool,
    summary: String,
    details: serde_json::Value,
}

type Check = Result<Outcome, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn a1(seed: u64) -> Check {
    let space = LogSphere::round();
    let basis = BasisSpec::monomial(1, 1, BasisSign::Anticanonical).map_err(err)?;
    let mut rows = Vec::new();
    let mut passed = true;
    for beta in [0.5, 1.0] {
        let bf = brute_force_log_partition(&space, &basis, beta, 48).map_err(err)?;
        let params = GibbsParams {
            beta,
            sweeps: 20_000,
            burn_in: 500,
            chains: 4,
            seed,
            partition: Partition::new(2, 2).map_err(err)?,
            ..Default::default()
        };
        let ti = log_partition(&space, &basis, beta, &params, 21).map_err(err)?;
        let deviation = (ti.neg_log_z_over_n - bf.neg_log_z_over_n).abs();
        let within = deviation <= A1_STDERR_MULTIPLE * ti.stderr;
        let rel = (bf.inf_free_energy - bf.neg_log_z_over_n).abs() / bf.neg_log_z_over_n.abs();
        passed &= within && rel < A1_RELATIVE_TOL;
        rows.push(json!({
            "beta": beta,
            "brute_force": bf.neg_log_z_over_n,
            "thermodynamic_integration": ti.neg_log_z_over_n,
            "stderr": ti.stderr,
            "deviation_in_stderr": deviation / ti.stderr,
            "parametric_inf": bf.inf_free_energy,
            "parametric_relative_error": rel,
        }));
    }
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "beta={} |dev|={:.2}se rel(infF)={:.1e}",
                r["beta"],
                r["deviation_in_stderr"].as_f64().unwrap_or(f64::NAN),
                r["parametric_relative_error"].as_f64().unwrap_or(f64::NAN)
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome { passed, summary, details: json!({ "rows": rows }) })
}

fn a2(seed: u64) -> Check {
    let space = LogSphere::round();
    let partition = Partition::new(8, 8).map_err(err)?;
    let expected = reference_cell_probabilities(&space, partition).map_err(err)?;
    let mut rows = Vec::new();
    let mut passed = true;
    for n in [16u64, 64] {
        let basis = BasisSpec::monomial(1, n - 1, BasisSign::Anticanonical).map_err(err)?;
        let mut tvs = Vec::new();
        let mut p_value = 0.0;
        for retained in [250usize, 1000, 4000] {
            let params = GibbsParams {
                beta: 0.0,
                sweeps: retained * 4 + 100,
                burn_in: 100,
                thin: 4,
                chains: 2,
                seed: seed + n,
                partition,
                ..Default::default()
            };
            let out = mcmc_sample(&space, &basis, &params).map_err(err)?;
            let d = empirical_density(&out.stats).map_err(err)?;
            tvs.push(total_variation(&d.probabilities, &expected));
            let total: u64 = out.stats.histogram.iter().sum();
            let chi2: f64 = out
                .stats
                .histogram
                .iter()
                .zip(&expected)
                .map(|(&c, &p)| {
                    let e = p * total as f64;
                    (c as f64 - e).powi(2) / e
                })
                .sum();
            let dist = ChiSquared::new((partition.cells() - 1) as f64).map_err(err)?;
            p_value = 1.0 - dist.cdf(chi2);
        }
        let monotone = tvs.windows(2).all(|w| w[1] < w[0]);
        passed &= monotone && p_value > A2_MIN_P_VALUE;
        rows.push(json!({ "n": n, "tv_by_retained": tvs, "p_value": p_value, "monotone": monotone }));
    }
    let summary = rows
        .iter()
        .map(|r| format!("N={} p={:.3} TV decreasing={}", r["n"], r["p_value"].as_f64().unwrap_or(0.0), r["monotone"]))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome { passed, summary, details: json!({ "rows": rows, "retained": [250, 1000, 4000] }) })
}

fn a3() -> Check {
    let disc = Discretization::for_space(&LogSphere::round(), 201).map_err(err)?;
    let sol = solve_ke(&disc, -1.0).map_err(err)?;
    let osc = sol.potential.oscillation();
    let passed =
        osc < A3_OSCILLATION_TOL && sol.residual < A3_RESIDUAL_TOL && sol.reconstruction_error < A3_RECONSTRUCTION_TOL;
    Ok(Outcome {
        passed,
        summary: format!(
            "osc={:.1e} residual={:.1e} reconstruction={:.1e}",
            osc, sol.residual, sol.reconstruction_error
        ),
        details: json!({
            "oscillation": osc,
            "residual": sol.residual,
            "reconstruction_error": sol.reconstruction_error,
            "iterations": sol.iterations,
        }),
    })
}

/// `μ/dV` of the β = -1 KE metric on the football with equal cone weights `c`:
/// the pushforward of the round metric under `z ↦ z^{1-c}`.
pub fn football_density(t: f64, ct: f64, c: f64) -> f64 {
    let a = 1.0 - c;
    statrs::function::beta::beta(a, a) * a / (t.powf(a) + ct.powf(a)).powi(2)
}

fn a4() -> Check {
    let c = 0.75;
    let disc = Discretization::for_space(&LogSphere::poles(q(3, 4), q(3, 4)).map_err(err)?, 401).map_err(err)?;
    let sol = solve_ke(&disc, -1.0).map_err(err)?;
    let grid = disc.grid();
    let worst = grid
        .nodes()
        .iter()
        .zip(grid.co_nodes())
        .zip(sol.density.values())
        .map(|((&t, &ct), &v)| {
            let exact = football_density(t, ct, c);
            (v - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    Ok(Outcome {
        passed: worst < A4_RELATIVE_TOL,
        summary: format!("max relative error {:.2e} over {} nodes", worst, grid.len()),
        details: json!({ "max_relative_error": worst, "nodes": grid.len(), "weight": "3/4" }),
    })
}

fn a5(seed: u64) -> Check {
    let space = LogSphere::poles(q(1, 2), q(1, 2)).map_err(err)?;
    let partition = Partition::new(32, 1).map_err(err)?;
    let disc = Discretization::for_space(&space, 401).map_err(err)?;
    let ke = solve_ke(&disc, 1.0).map_err(err)?;
    let target = grid_cell_probabilities(disc.grid_space(), ke.density.values(), partition).map_err(err)?;
    let mut seeds = Vec::new();
    let mut votes = 0;
    for s in 0..3u64 {
        let mut tvs = Vec::new();
        for k in [24u64, 100] {
            let basis = BasisSpec::for_space(&space, k, BasisSign::Anticanonical).map_err(err)?;
            let params = GibbsParams {
                beta: 1.0,
                sweeps: 10_000,
                burn_in: 500,
                chains: 4,
                seed: seed + 100 * s,
                partition,
                ..Default::default()
            };
            let out = mcmc_sample(&space, &basis, &params).map_err(err)?;
            tvs.push(total_variation(&empirical_density(&out.stats).map_err(err)?.probabilities, &target));
        }
        let ok = tvs[1] < A5_TV_TOL && tvs[1] < tvs[0];
        votes += ok as usize;
        seeds.push(json!({ "seed": seed + 100 * s, "tv_n25": tvs[0], "tv_n101": tvs[1], "pass": ok }));
    }
    Ok(Outcome {
        passed: votes >= 2,
        summary: format!(
            "{votes}/3 seeds pass; TV(N=101) = {}",
            seeds.iter().map(|s| format!("{:.4}", s["tv_n101"].as_f64().unwrap_or(f64::NAN))).collect::<Vec<_>>().join(", ")
        ),
        details: json!({ "pair": "(1/2, 1/2) at the poles", "seeds": seeds }),
    })
}

/// The pair `½[2] + ½[-2] + ½[∞]`.
pub fn three_halves_pair() -> LogSphere {
    let pts = [SpherePoint::finite(2.0, 0.0), SpherePoint::finite(-2.0, 0.0), SpherePoint::Infinity];
    LogSphere::new(pts.iter().map(|&point| LogPoint { point, weight: q(1, 2) }).collect())
        .expect("valid weights")
}

/// Cell probabilities of the β = -1 KE measure of [`three_halves_pair`]: the
/// pushforward of the round measure under `z ↦ z² + z⁻²`, whose branch values
/// are exactly `2, -2, ∞`, each with ramification 2. Midpoint rule in `(t, θ)`
/// with `res²` points.
pub fn three_halves_ke_cells(partition: Partition, res: usize) -> Vec<f64> {
    let mut cells = vec![0.0; partition.cells()];
    for i in 0..res {
        let t = (i as f64 + 0.5) / res as f64;
        let r = (t / (1.0 - t)).sqrt();
        for j in 0..res {
            let th = (j as f64 + 0.5) / res as f64 * std::f64::consts::TAU;
            let z = Complex64::from_polar(r, th);
            let z2 = z * z;
            let w = z2 + z2.inv();
            cells[partition.cell(&SpherePoint::Finite(w).to_unit())] += 1.0;
        }
    }
    let total = (res * res) as f64;
    cells.iter().map(|c| c / total).collect()
}

fn a6(seed: u64) -> Check {
    let space = three_halves_pair();
    let check = gibbs_stability_check(&space, 2).map_err(err)?;
    if check.verdict == Verdict::Unstable {
        return Ok(Outcome {
            passed: false,
            summary: "pair fails the Gibbs stability check".into(),
            details: json!({ "bound": ratio(&check.bound) }),
        });
    }
    let partition = Partition::new(16, 16).map_err(err)?;
    let target = three_halves_ke_cells(partition, 2000);
    let mut rows = Vec::new();
    for k in [48u64, 98, 198, 398] {
        let basis = BasisSpec::for_space(&space, k, BasisSign::Anticanonical).map_err(err)?;
        let params = GibbsParams { beta: -1.0, sweeps: 10_000, burn_in: 500, chains: 4, seed, partition, ..Default::default() };
        let out = mcmc_sample(&space, &basis, &params).map_err(err)?;
        let tv = total_variation(&empirical_density(&out.stats).map_err(err)?.probabilities, &target);
        rows.push((basis.n_particles(), tv));
    }
    let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    let last = rows.last().map(|r| r.1).unwrap_or(f64::NAN);
    Ok(Outcome {
        passed: decreasing && last < A6_TV_TOL,
        summary: format!(
            "TV by N: {}; stability verdict {:?} (bound {})",
            rows.iter().map(|(n, tv)| format!("{n}:{tv:.4}")).collect::<Vec<_>>().join(" "),
            check.verdict,
            ratio(&check.bound)
        ),
        details: json!({
            "pair": "(1/2)[2] + (1/2)[-2] + (1/2)[inf]",
            "rows": rows.iter().map(|(n, tv)| json!({ "n": n, "tv": tv })).collect::<Vec<_>>(),
            "stability_verdict": format!("{:?}", check.verdict),
            "stability_bound": ratio(&check.bound),
        }),
    })
}

fn a7() -> Check {
    let round = NaSpace::Curve(LogSphere::round());
    let mut line = Vec::new();
    for k in 1..=5 {
        line.push(delta_k(&round, k).map_err(err)?.value);
    }
    let line_ok = line.iter().all(|d| *d == q(1, 1));
    let sets = [
        [q(1, 2), q(1, 2), q(1, 2)],
        [q(1, 3), q(1, 2), q(2, 3)],
        [q(1, 4), q(1, 4), q(3, 4)],
        [q(1, 5), q(2, 5), q(3, 5)],
        [q(1, 2), q(2, 3), q(1, 6)],
    ];
    let pts = [SpherePoint::ZERO, SpherePoint::finite(1.0, 0.0), SpherePoint::Infinity];
    let mut rows = Vec::new();
    let mut triples_ok = true;
    for ws in sets {
        let sum = ws.iter().fold(q(0, 1), |a, w| a + w);
        let max = ws.iter().max().cloned().unwrap_or_else(|| q(0, 1));
        let closed = q(2, 1) * (q(1, 1) - &max) / (q(2, 1) - &sum);
        let space = LogSphere::new(
            pts.iter().zip(ws.iter()).map(|(&point, w)| LogPoint { point, weight: w.clone() }).collect(),
        )
        .map_err(err)?;
        let level = (1..=60u64).find(|&k| space.level_clears_denominators(k)).ok_or("no clearing level")?;
        let na = NaSpace::Curve(space);
        let limit = delta(&na).map_err(err)?.value;
        let at_level = delta_k(&na, level).map_err(err)?.value;
        let ok = limit == closed && at_level == closed;
        triples_ok &= ok;
        rows.push(json!({
            "weights": ws.iter().map(ratio).collect::<Vec<_>>(),
            "closed_form": ratio(&closed),
            "delta": ratio(&limit),
            "level": level,
            "delta_k": ratio(&at_level),
        }));
    }
    Ok(Outcome {
        passed: line_ok && triples_ok,
        summary: format!(
            "delta_k(P1) = {} for k=1..5; {}/5 triples bit-exact",
            line.iter().map(ratio).collect::<Vec<_>>().join(","),
            rows.iter().filter(|r| r["closed_form"] == r["delta"] && r["closed_form"] == r["delta_k"]).count()
        ),
        details: json!({ "line": line.iter().map(ratio).collect::<Vec<_>>(), "triples": rows }),
    })
}

fn a8() -> Check {
    let round = NaSpace::Curve(LogSphere::round());
    let football = NaSpace::Curve(LogSphere::poles(q(3, 4), q(3, 4)).map_err(err)?);
    let val = |p: SpherePoint, s: i64| CurveValuation::new(p, q(s, 1)).map(Valuation::Curve).map_err(err);
    let cases = vec![
        ("P1", &round, val(SpherePoint::ZERO, 1)?),
        ("P1", &round, val(SpherePoint::Infinity, 2)?),
        ("P1", &round, val(SpherePoint::finite(1.0, 1.0), 7)?),
        ("football", &football, val(SpherePoint::ZERO, 1)?),
        ("football", &football, val(SpherePoint::Infinity, 3)?),
        ("football", &football, val(SpherePoint::finite(1.0, 0.0), 1)?),
    ];
    let mut rows = Vec::new();
    let mut passed = true;
    for (name, space, v) in cases {
        // the football needs k divisible by 4; its first ten admissible levels are 4..40
        let levels: Vec<u64> = if name == "P1" { (1..=10).collect() } else { (1..=40).collect() };
        let t = restriction_experiment(space, &v, &levels).map_err(err)?;
        let bounded = t.rows.iter().all(|r| r.gap <= &t.fitted_c / q(r.level as i64, 1));
        let ok = t.nonincreasing && bounded && t.rows.len() == 10;
        passed &= ok;
        rows.push(json!({
            "space": name,
            "valuation": format!("{v:?}"),
            "levels": t.rows.iter().map(|r| r.level).collect::<Vec<_>>(),
            "gaps": t.rows.iter().map(|r| ratio(&r.gap)).collect::<Vec<_>>(),
            "fitted_c": ratio(&t.fitted_c),
            "nonincreasing": t.nonincreasing,
        }));
    }
    Ok(Outcome {
        passed,
        summary: format!(
            "{} valuations; fitted C = {}",
            rows.len(),
            rows.iter().map(|r| r["fitted_c"].as_str().unwrap_or("?").to_string()).collect::<Vec<_>>().join(",")
        ),
        details: json!({ "rows": rows }),
    })
}

fn a9() -> Check {
    let cases = [
        ("P1", LogSphere::round(), vec![1u64, 2, 3]),
        ("(1/2,1/2,1/2)", three_halves_pair(), vec![2]),
        ("(1/3,2/3) poles", LogSphere::poles(q(1, 3), q(2, 3)).map_err(err)?, vec![3]),
    ];
    let mut rows = Vec::new();
    let mut passed = true;
    for (name, space, levels) in cases {
        for k in levels {
            let c = lct_chain(&space, k).map_err(err)?;
            passed &= c.upper_bound <= c.delta_k;
            rows.push(json!({
                "space": name,
                "k": k,
                "lct_upper_bound": ratio(&c.upper_bound),
                "delta_k": ratio(&c.delta_k),
                "margin": ratio(&c.margin),
                "examined": c.examined,
                "skipped_zero_energy": c.skipped_zero_energy,
            }));
        }
    }
    Ok(Outcome {
        passed,
        summary: rows
            .iter()
            .map(|r| format!("{} k={}: {} <= {}", r["space"].as_str().unwrap_or(""), r["k"], r["lct_upper_bound"].as_str().unwrap_or(""), r["delta_k"].as_str().unwrap_or("")))
            .collect::<Vec<_>>()
            .join("; "),
        details: json!({ "rows": rows }),
    })
}

/// A random admissible potential: a cosine sum in `t` scaled into the admissible cone.
pub fn random_potential(disc: &Arc<Discretization>, rng: &mut ChaCha8Rng) -> Result<Potential, String> {
    let modes = rng.random_range(1..=5usize);
    let amps: Vec<f64> = (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect();
    let raw: Vec<f64> = disc
        .grid()
        .nodes()
        .iter()
        .map(|&t| {
            amps.iter()
                .enumerate()
                .map(|(j, a)| a * ((j + 1) as f64 * std::f64::consts::PI * t).cos())
                .sum()
        })
        .collect();
    let s = admissible_scaling(disc, &raw, rng.random_range(0.1..0.95));
    Potential::new(disc, raw.iter().map(|x| s * x).collect()).map_err(err)
}

fn a10(seed: u64) -> Check {
    let round = Discretization::for_space(&LogSphere::round(), 201).map_err(err)?;
    let gap = duality_gap(&round).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spaces = [
        Discretization::for_space(&LogSphere::round(), 81).map_err(err)?,
        Discretization::for_space(&LogSphere::poles(q(1, 2), q(1, 2)).map_err(err)?, 81).map_err(err)?,
        Discretization::for_space(&LogSphere::poles(q(3, 4), q(1, 3)).map_err(err)?, 81).map_err(err)?,
    ];
    let (mut m_vs_d, mut ent_neg, mut e_neg) = (0, 0, 0);
    let mut worst_ma: f64 = 0.0;
    let mut worst_du: f64 = 0.0;
    for i in 0..A10_SAMPLES {
        let disc = &spaces[i % spaces.len()];
        let u = random_potential(disc, &mut rng)?;
        let mu = monge_ampere(&u).map_err(err)?;
        if mabuchi(&u, -1.0).map_err(err)? < ding(&u, -1.0).map_err(err)? - A10_VIOLATION_TOL {
            m_vs_d += 1;
        }
        if entropy(&mu, &Density::reference(disc)).map_err(err)? < -A10_VIOLATION_TOL {
            ent_neg += 1;
        }
        if energy_of_measure(&mu).map_err(err)? < -A10_VIOLATION_TOL {
            e_neg += 1;
        }
        // directional derivatives of the two quadratic functionals
        let v = random_potential(disc, &mut rng)?;
        let eps = 1e-3;
        let shift = |s: f64| {
            Potential::new(disc, u.values().iter().zip(v.values()).map(|(a, b)| a + s * b).collect())
        };
        let fd = (script_energy(&shift(eps).map_err(err)?) - script_energy(&shift(-eps).map_err(err)?)) / (2.0 * eps);
        let exact: f64 = mu.masses().iter().zip(v.values()).map(|(m, x)| m * x).sum();
        worst_ma = worst_ma.max((fd - exact).abs() / exact.abs().max(1e-3));

        let nu = monge_ampere(&v).map_err(err)?.masses();
        let base = mu.masses();
        let dir: Vec<f64> = nu.iter().zip(&base).map(|(a, b)| a - b).collect();
        let at = |s: f64| {
            Density::from_masses(disc, &base.iter().zip(&dir).map(|(b, d)| b + s * d).collect::<Vec<_>>())
        };
        let fd = (energy_of_measure(&at(eps).map_err(err)?).map_err(err)?
            - energy_of_measure(&at(-eps).map_err(err)?).map_err(err)?)
            / (2.0 * eps);
        let exact: f64 = -u.values().iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
        worst_du = worst_du.max((fd - exact).abs() / exact.abs().max(1e-3));
    }
    let passed = gap.gap < A10_DUALITY_TOL
        && m_vs_d == 0
        && ent_neg == 0
        && e_neg == 0
        && worst_ma < A10_DERIVATIVE_TOL
        && worst_du < A10_DERIVATIVE_TOL;
    Ok(Outcome {
        passed,
        summary: format!(
            "gap={:.1e}; violations M<D:{m_vs_d} Ent<0:{ent_neg} E<0:{e_neg}; dE=MA {:.1e}, dE=-u {:.1e}",
            gap.gap, worst_ma, worst_du
        ),
        details: json!({
            "duality_gap": gap.gap,
            "inf_free_energy": gap.primal.value,
            "inf_dual": gap.dual.value,
            "samples": A10_SAMPLES,
            "mabuchi_below_ding": m_vs_d,
            "negative_entropy": ent_neg,
            "negative_energy": e_neg,
            "script_energy_derivative_error": worst_ma,
            "energy_derivative_error": worst_du,
        }),
    })
}
