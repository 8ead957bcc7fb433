//! One runner per subcommand. Each reads a resolved plan and writes its
//! outputs, then the manifest, into the output directory.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use kelab_core::ensemble::{
    brute_force_log_partition, empirical_density, log_partition, mcmc_sample, BasisSign, BasisSpec, GibbsParams,
    Partition,
};
use kelab_core::geometry::LogSphere;
use kelab_core::stability::{
    delta_k, delta_k_with_radius, delta_with_radius, f_na, gibbs_stability_check, lct_chain, log_discrepancy,
    na_energy_per_particle, product_log_discrepancy, ProductValuation, SectionBasis, Verdict,
};
use kelab_core::variational::{solve_ke_with, Discretization, FunctionalReport, Potential};
use kelab_core::Rational;
use num_traits::{One, Signed, Zero};
use serde_json::json;

use crate::acceptance;
use crate::config::{CommandKind, Config, Space};
use crate::error::{LabError, LabResult};
use crate::format::{self, ratio};
use crate::manifest::{sha256_hex, OutputDir, RunManifest, SCHEMA_VERSION};

/// Runs `plan` into `out`. On failure after validation, a diagnostics file is
/// left in `out` and no manifest is written.
pub fn execute(plan: &Config, out: &Path) -> LabResult<()> {
    let command = plan.command.ok_or_else(|| LabError::Validation("plan has no command".into()))?;
    let start = Instant::now();
    let mut dir = OutputDir::create(out)?;
    let result = match command {
        CommandKind::Sample => sample(plan, &mut dir),
        CommandKind::Solve => solve(plan, &mut dir),
        CommandKind::Delta => delta(plan, &mut dir),
        CommandKind::LctChain => chain(plan, &mut dir),
        CommandKind::NaEnergy => na_energy(plan, &mut dir),
        CommandKind::Partition => partition(plan, &mut dir),
        CommandKind::Crosscheck => crosscheck(plan, &mut dir),
    };
    let echo = plan.to_toml();
    if let Err(e) = result {
        if matches!(e, LabError::Computation(_)) {
            dir.write_diagnostics(&json!({
                "error": e.reason(),
                "command": command,
                "config_echo": echo,
            }))?;
        }
        return Err(e);
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: serde_json::to_value(command).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        input_hash: sha256_hex(echo.as_bytes()),
        config_echo: echo,
        seed: plan.seed_value(),
        outputs: dir.records().to_vec(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    dir.finish(&manifest)
}

fn basis_for(space: &LogSphere, k: u64, n: Option<u64>) -> LabResult<BasisSpec> {
    Ok(match n {
        Some(0) => return Err(LabError::Validation("particle number must be at least 1".into())),
        Some(n) => BasisSpec::monomial(k, n - 1, BasisSign::Anticanonical)?,
        None => BasisSpec::for_space(space, k, BasisSign::Anticanonical)?,
    })
}

/// Gibbs stability at level `k`, with the diagonal bound `δ_k` standing in
/// when the full chain is too large to enumerate.
pub fn stability_gate(space: &LogSphere, k: u64) -> LabResult<(Verdict, Rational, String)> {
    match gibbs_stability_check(space, k) {
        Ok(c) => Ok((c.verdict, c.bound, c.note)),
        Err(kelab_core::Error::InvalidInput(msg)) if msg.contains("enumeration refused") => {
            let bound = delta_k(&kelab_core::stability::NaSpace::Curve(space.clone()), k)?.value;
            let verdict = if bound < Rational::one() {
                Verdict::Unstable
            } else if bound.is_one() {
                Verdict::Inconclusive
            } else {
                Verdict::InconclusiveStable
            };
            Ok((verdict, bound, "diagonal valuations only; the mixed chain is too large at this level".into()))
        }
        Err(e) => Err(e.into()),
    }
}

fn sample(plan: &Config, dir: &mut OutputDir) -> LabResult<()> {
    let s = plan.sample.clone().unwrap_or_default();
    let space = plan.resolve_space()?.curve()?.clone();
    let basis = basis_for(&space, s.k, s.n)?;
    let mut stability = serde_json::Value::Null;
    if s.beta < 0.0 {
        let (verdict, bound, note) = stability_gate(&space, s.k)?;
        if verdict != Verdict::InconclusiveStable && !s.force {
            return Err(LabError::Validation(format!(
                "beta < 0 needs a passing Gibbs stability check at k = {}: verdict {verdict:?}, bound {}; use --force to sample anyway",
                s.k,
                ratio(&bound)
            )));
        }
        stability = json!({ "verdict": verdict, "bound": ratio(&bound), "note": note, "forced": s.force });
    }
    let params = GibbsParams {
        beta: s.beta,
        sweeps: s.sweeps,
        burn_in: s.burn_in,
        proposal_scale: s.proposal_scale,
        seed: plan.seed_value(),
        chains: s.chains,
        thin: s.thin,
        partition: Partition::new(s.bands, s.sectors)?,
        autotune: s.autotune,
        energy_ceiling: s.energy_ceiling,
    };
    params.validate()?;
    let run = mcmc_sample(&space, &basis, &params)?;
    let stats = &run.stats;

    let mut hist = String::from("band,sector,count\n");
    for (i, c) in stats.histogram.iter().enumerate() {
        let _ = writeln!(hist, "{},{},{}", i / s.sectors, i % s.sectors, c);
    }
    dir.write("histogram.csv", hist.as_bytes())?;

    let mut trace = String::from("chain,sweep,energy\n");
    for (c, t) in stats.chain_traces.iter().enumerate() {
        for (i, e) in t.iter().enumerate() {
            let _ = writeln!(trace, "{c},{i},{e:e}");
        }
    }
    dir.write("energy_trace.csv", trace.as_bytes())?;

    let density = empirical_density(stats)?;
    dir.write_json(
        "summary.json",
        &json!({
            "n_particles": stats.n_particles,
            "level": basis.level(),
            "beta": s.beta,
            "acceptance_rate": stats.acceptance_rate,
            "mean_energy": stats.mean_energy(),
            "energy_stderr": stats.energy_standard_error(),
            "autocorrelation_time": stats.autocorrelation_time,
            "retained_sweeps": stats.retained_sweeps,
            "proposal_scales": stats.proposal_scales,
            "conditional_on_finite_z": stats.conditional_on_finite_z,
            "band_marginal": density.band_marginal(),
            "stability": stability,
        }),
    )
}

fn solve(plan: &Config, dir: &mut OutputDir) -> LabResult<()> {
    let s = plan.solve.clone().unwrap_or_default();
    let nodes = plan.grid.clone().unwrap_or_default().nodes;
    let space = plan.resolve_space()?.curve()?.clone();
    if !s.beta.is_finite() {
        return Err(LabError::Validation("beta must be finite".into()));
    }
    let disc = Discretization::for_space(&space, nodes)?;
    let sol = solve_ke_with(&disc, s.beta, s.scheme, &Potential::zero(&disc))?;
    let t = disc.grid().nodes();

    let mut pot = String::from("t,u\n");
    let mut dens = String::from("t,density\n");
    for (i, &ti) in t.iter().enumerate() {
        let _ = writeln!(pot, "{ti:e},{:e}", sol.potential.values()[i]);
        let _ = writeln!(dens, "{ti:e},{:e}", sol.density.values()[i]);
    }
    dir.write("potential.csv", pot.as_bytes())?;
    dir.write("density.csv", dens.as_bytes())?;
    let report = FunctionalReport::evaluate(&sol.potential, s.beta)?;
    dir.write_json(
        "functionals.json",
        &json!({
            "beta": s.beta,
            "scheme": s.scheme,
            "nodes": nodes,
            "functionals": report,
            "residual": sol.residual,
            "reconstruction_error": sol.reconstruction_error,
            "normalizing_shift": sol.normalizing_shift,
            "oscillation": sol.potential.oscillation(),
            "iterations": sol.iterations,
        }),
    )
}

fn delta(plan: &Config, dir: &mut OutputDir) -> LabResult<()> {
    let s = plan.delta.clone().unwrap_or_default();
    if s.k == 0 {
        return Err(LabError::Validation("k must be at least 1".into()));
    }
    let space = plan.resolve_space()?;
    let na = space.na();
    let mut csv = String::from("k,delta_k_num,delta_k_den,witness\n");
    let mut skipped = Vec::new();
    for k in 1..=s.k {
        if let Space::Curve(c) = &space {
            if !c.level_clears_denominators(k) {
                skipped.push(k);
                continue;
            }
        }
        let d = delta_k_with_radius(&na, k, s.radius)?;
        let _ = writeln!(csv, "{k},{},{},{}", d.value.numer(), d.value.denom(), format::valuation(&d.witness));
    }
    dir.write("delta.csv", csv.as_bytes())?;
    let limit = delta_with_radius(&na, s.radius)?;
    dir.write_json(
        "delta.json",
        &json!({
            "delta": ratio(&limit.value),
            "witness": format::valuation(&limit.witness),
            "log_discrepancy": ratio(&log_discrepancy(&limit.witness, &na)?),
            "f_na": ratio(&f_na(&limit.witness, &na)?),
            "candidates": limit.candidates,
            "warning": limit.warning,
            "skipped_levels": skipped,
        }),
    )?;
    if let Some(w) = &limit.warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn entry_json(e: &kelab_core::stability::ChainEntry) -> serde_json::Value {
    json!({
        "valuation": format::product(&e.valuation),
        "frame": format::point(&e.frame),
        "energy": ratio(&e.energy),
        "ratio": ratio(&e.ratio),
    })
}

fn chain(plan: &Config, dir: &mut OutputDir) -> LabResult<()> {
    let k = plan.lct_chain.clone().unwrap_or_default().k;
    let space = plan.resolve_space()?.curve()?.clone();
    let c = lct_chain(&space, k)?;
    let bound_minus_one = &c.upper_bound - Rational::one();
    let verdict = if bound_minus_one.is_negative() {
        Verdict::Unstable
    } else if bound_minus_one.is_zero() {
        Verdict::Inconclusive
    } else {
        Verdict::InconclusiveStable
    };
    dir.write_json(
        "lct_chain.json",
        &json!({
            "level": c.level,
            "n_particles": c.n_particles,
            "upper_bound": ratio(&c.upper_bound),
            "delta_k": ratio(&c.delta_k),
            "margin": ratio(&c.margin),
            "ordered": c.ordered,
            "verdict": verdict,
            "witness": entry_json(&c.witness),
            "diagonal": c.diagonal.iter().map(entry_json).collect::<Vec<_>>(),
            "examined": c.examined,
            "skipped_zero_energy": c.skipped_zero_energy,
        }),
    )
}

fn na_energy(plan: &Config, dir: &mut OutputDir) -> LabResult<()> {
    let s = plan.na_energy.clone().unwrap_or_default();
    let space = plan.resolve_space()?;
    let na = space.na();
    let factors = if s.valuations.is_empty() {
        vec![delta_k(&na, s.k)?.witness]
    } else {
        s.valuations.iter().map(|v| v.resolve(&space)).collect::<LabResult<Vec<_>>>()?
    };
    let basis = SectionBasis::adapted(&factors[0], &na, s.k)?;
    let n = basis.len();
    let pv = match factors.len() {
        1 => ProductValuation::diagonal(factors[0].clone(), n)?,
        m if m == n => ProductValuation::new(factors)?,
        m => {
            return Err(LabError::Validation(format!(
                "give one valuation or one per particle: got {m}, level {} has {n} particles",
                s.k
            )))
        }
    };
    let energy = na_energy_per_particle(&pv, &basis)?;
    let a = product_log_discrepancy(&pv, &na)? / Rational::from_integer((n as i64).into());
    let ratio_value = if energy.is_zero() { None } else { Some(ratio(&(&a / &energy))) };
    dir.write_json(
        "na_energy.json",
        &json!({
            "level": s.k,
            "n_particles": n,
            "valuation": format::product(&pv),
            "energy_per_particle": ratio(&energy),
            "log_discrepancy_per_particle": ratio(&a),
            "ratio": ratio_value,
        }),
    )
}

fn partition(plan: &Config, dir: &mut OutputDir) -> LabResult<()> {
    let s = plan.partition.clone().unwrap_or_default();
    let space = plan.resolve_space()?.curve()?.clone();
    let basis = basis_for(&space, s.k, s.n)?;
    if s.betas.is_empty() || s.betas.iter().any(|b| !b.is_finite()) {
        return Err(LabError::Validation("betas must be a non-empty list of finite numbers".into()));
    }
    let mut csv = String::from("beta,neg_log_Z_over_N,stderr\n");
    let mut rows = Vec::new();
    for &beta in &s.betas {
        let params = GibbsParams {
            beta,
            sweeps: s.sweeps,
            burn_in: s.burn_in,
            chains: s.chains,
            seed: plan.seed_value(),
            ..Default::default()
        };
        let est = log_partition(&space, &basis, beta, &params, s.legs)?;
        let _ = writeln!(csv, "{beta},{:e},{:e}", est.neg_log_z_over_n, est.stderr);
        let oracle = if basis.n_particles() <= 3 {
            brute_force_log_partition(&space, &basis, beta, 32).ok().map(|b| b.neg_log_z_over_n)
        } else {
            None
        };
        rows.push(json!({ "beta": beta, "estimate": est, "quadrature": oracle }));
    }
    dir.write("partition.csv", csv.as_bytes())?;
    dir.write_json("partition.json", &json!({ "n_particles": basis.n_particles(), "rows": rows }))
}

fn crosscheck(plan: &Config, dir: &mut OutputDir) -> LabResult<()> {
    let s = plan.crosscheck.clone().unwrap_or_default();
    if s.suite != "acceptance" {
        return Err(LabError::Validation(format!("unknown suite {:?}; available: acceptance", s.suite)));
    }
    let report = acceptance::run_suite(plan.seed_value(), &s.only).map_err(LabError::Validation)?;
    for c in &report.criteria {
        println!("{}", c.line());
    }
    dir.write_json("acceptance_report.json", &report)?;
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect();
        Err(LabError::Computation(format!("acceptance criteria failed: {}", failed.join(", "))))
    }
}
