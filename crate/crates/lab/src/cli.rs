//! Command-line arguments. Flags override the config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use kelab_core::variational::KeScheme;

use crate::config::{CommandKind, Config, LogPointSpec, SpaceKind, SpaceSpec};
use crate::error::{LabError, LabResult};

#[derive(Debug, Parser)]
#[command(name = "ke-lab", version, about = "Gibbs ensembles, Kahler-Einstein solves and stability thresholds on the Riemann sphere")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Log point `re,im,p/q` or `inf,p/q`; repeat for several. Replaces the config's space.
    #[arg(long = "log-point", allow_hyphen_values = true)]
    pub log_points: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the Gibbs point process and write histograms and energy traces.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        /// Particle number; overrides the basis determined by the level.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        sweeps: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
        /// Sample at negative beta without a passing stability check.
        #[arg(long)]
        force: bool,
    },
    /// Solve the Kahler-Einstein equation on a radial grid.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<KeScheme>,
    },
    /// Tabulate delta_k for k = 1..K and the limit delta.
    Delta {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<u64>,
        /// Half-width of the toric search box.
        #[arg(long)]
        radius: Option<i64>,
    },
    /// Upper bounds for the log canonical threshold of the Vandermonde divisor.
    LctChain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<u64>,
    },
    /// Non-Archimedean energy of a product valuation (configured in [na_energy]).
    NaEnergy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<u64>,
    },
    /// Estimate -(1/N) log Z_N(beta) by thermodynamic integration.
    Partition {
        #[command(flatten)]
        common: Common,
        /// Inverse temperature; repeat for several.
        #[arg(long = "beta", allow_hyphen_values = true)]
        betas: Vec<f64>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        legs: Option<usize>,
        #[arg(long)]
        sweeps: Option<usize>,
    },
    /// Run a named cross-check suite.
    Crosscheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "acceptance")]
        suite: String,
        /// Comma-separated criterion ids, e.g. A3,A7.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

fn parse_scheme(s: &str) -> Result<KeScheme, String> {
    match s {
        "consistent" => Ok(KeScheme::Consistent),
        "lumped" => Ok(KeScheme::Lumped),
        _ => Err(format!("unknown scheme {s:?}; expected consistent or lumped")),
    }
}

fn base(common: &Common, kind: CommandKind) -> LabResult<Config> {
    let file = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let mut plan = file.into_plan(kind)?;
    if let Some(seed) = common.seed {
        if seed > i64::MAX as u64 {
            return Err(LabError::Validation("seed must fit in a signed 64-bit integer".into()));
        }
        plan.seed = Some(seed);
    }
    if !common.log_points.is_empty() {
        let pts = common.log_points.iter().map(|s| LogPointSpec::parse_cli(s)).collect::<LabResult<Vec<_>>>()?;
        plan.space = Some(SpaceSpec { kind: SpaceKind::LogSphere, log_points: pts, vertices: Vec::new() });
    }
    Ok(plan)
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Sample { common, .. }
            | Command::Solve { common, .. }
            | Command::Delta { common, .. }
            | Command::LctChain { common, .. }
            | Command::NaEnergy { common, .. }
            | Command::Partition { common, .. }
            | Command::Crosscheck { common, .. } => common,
        }
    }

    /// Merges the config file with the flags into a resolved plan.
    pub fn plan(&self) -> LabResult<Config> {
        macro_rules! set {
            ($slot:expr, $value:expr) => {
                if let Some(v) = $value {
                    $slot = v;
                }
            };
        }
        Ok(match self {
            Command::Sample { common, beta, n, k, sweeps, burn_in, chains, force } => {
                let mut plan = base(common, CommandKind::Sample)?;
                let s = plan.sample.get_or_insert_with(Default::default);
                set!(s.beta, *beta);
                set!(s.k, *k);
                set!(s.sweeps, *sweeps);
                set!(s.burn_in, *burn_in);
                set!(s.chains, *chains);
                if n.is_some() {
                    s.n = *n;
                }
                s.force |= *force;
                plan
            }
            Command::Solve { common, beta, nodes, scheme } => {
                let mut plan = base(common, CommandKind::Solve)?;
                let s = plan.solve.get_or_insert_with(Default::default);
                set!(s.beta, *beta);
                set!(s.scheme, *scheme);
                set!(plan.grid.get_or_insert_with(Default::default).nodes, *nodes);
                plan
            }
            Command::Delta { common, k, radius } => {
                let mut plan = base(common, CommandKind::Delta)?;
                let s = plan.delta.get_or_insert_with(Default::default);
                set!(s.k, *k);
                set!(s.radius, *radius);
                plan
            }
            Command::LctChain { common, k } => {
                let mut plan = base(common, CommandKind::LctChain)?;
                set!(plan.lct_chain.get_or_insert_with(Default::default).k, *k);
                plan
            }
            Command::NaEnergy { common, k } => {
                let mut plan = base(common, CommandKind::NaEnergy)?;
                set!(plan.na_energy.get_or_insert_with(Default::default).k, *k);
                plan
            }
            Command::Partition { common, betas, n, k, legs, sweeps } => {
                let mut plan = base(common, CommandKind::Partition)?;
                let s = plan.partition.get_or_insert_with(Default::default);
                if !betas.is_empty() {
                    s.betas = betas.clone();
                }
                if n.is_some() {
                    s.n = *n;
                }
                set!(s.k, *k);
                set!(s.legs, *legs);
                set!(s.sweeps, *sweeps);
                plan
            }
            Command::Crosscheck { common, suite, only } => {
                let mut plan = base(common, CommandKind::Crosscheck)?;
                let s = plan.crosscheck.get_or_insert_with(Default::default);
                s.suite = suite.clone();
                if !only.is_empty() {
                    s.only = only.clone();
                }
                plan
            }
        })
    }
}

/// Sizes the global thread pool from `KELAB_THREADS`, if set.
pub fn configure_threads() -> LabResult<()> {
    let Ok(v) = std::env::var("KELAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| LabError::Validation(format!("KELAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| LabError::Computation(format!("thread pool: {e}")))
}

/// Parses, plans and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = configure_threads()
        .and_then(|_| cli.command.plan())
        .and_then(|plan| crate::commands::execute(&plan, &cli.command.common().out));
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.reason());
            e.exit_code()
        }
    }
}
