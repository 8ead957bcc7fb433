//! TOML experiment configuration.
//!
//! A config file and a resolved plan share one type, [`Config`]. A plan has
//! `command`, `seed`, `space` and the section of its command filled in, every
//! other section empty. Plans serialize back to TOML that parses to the same
//! plan, and that text is the `config_echo` of the run manifest.

use std::str::FromStr;

use kelab_core::geometry::{LogPoint, LogSphere, SpherePoint, ToricFano};
use kelab_core::stability::{CurveValuation, NaSpace, ToricValuation, Valuation};
use kelab_core::variational::KeScheme;
use kelab_core::Rational;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Sample,
    Solve,
    Delta,
    LctChain,
    NaEnergy,
    Partition,
    Crosscheck,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lct_chain: Option<LevelSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub na_energy: Option<NaEnergySettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crosscheck: Option<CrosscheckSettings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    #[default]
    LogSphere,
    Toric,
}

/// `[re, im, "p/q"]` or `["inf", "p/q"]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogPointSpec {
    Finite(f64, f64, String),
    Infinite(String, String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    #[serde(default)]
    pub kind: SpaceKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log_points: Vec<LogPointSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices: Vec<Vec<i64>>,
}

/// A resolved space.
#[derive(Debug, Clone)]
pub enum Space {
    Curve(LogSphere),
    Toric(ToricFano),
}

impl Space {
    pub fn curve(&self) -> LabResult<&LogSphere> {
        match self {
            Space::Curve(s) => Ok(s),
            Space::Toric(_) => Err(LabError::Validation("this command needs kind = \"log_sphere\"".into())),
        }
    }

    pub fn na(&self) -> NaSpace {
        match self {
            Space::Curve(s) => NaSpace::Curve(s.clone()),
            Space::Toric(p) => NaSpace::Toric(p.clone()),
        }
    }
}

pub fn parse_rational(s: &str) -> LabResult<Rational> {
    Rational::from_str(s.trim()).map_err(|_| LabError::Validation(format!("cannot parse rational {s:?}")))
}

impl LogPointSpec {
    pub fn resolve(&self) -> LabResult<LogPoint> {
        let (point, weight) = match self {
            LogPointSpec::Finite(re, im, w) => {
                if !re.is_finite() || !im.is_finite() {
                    return Err(LabError::Validation("log point coordinates must be finite".into()));
                }
                (SpherePoint::finite(*re, *im), w)
            }
            LogPointSpec::Infinite(tag, w) if tag == "inf" => (SpherePoint::Infinity, w),
            LogPointSpec::Infinite(tag, _) => {
                return Err(LabError::Validation(format!("log point {tag:?}: expected [re, im, w] or [\"inf\", w]")))
            }
        };
        Ok(LogPoint { point, weight: parse_rational(weight)? })
    }

    /// `re,im,p/q` or `inf,p/q`, as given on the command line.
    pub fn parse_cli(s: &str) -> LabResult<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || LabError::Validation(format!("log point {s:?}: expected re,im,p/q or inf,p/q"));
        match parts.as_slice() {
            ["inf", w] => Ok(LogPointSpec::Infinite("inf".into(), w.to_string())),
            [re, im, w] => Ok(LogPointSpec::Finite(
                re.parse().map_err(|_| bad())?,
                im.parse().map_err(|_| bad())?,
                w.to_string(),
            )),
            _ => Err(bad()),
        }
    }
}

impl SpaceSpec {
    pub fn resolve(&self) -> LabResult<Space> {
        match self.kind {
            SpaceKind::LogSphere => {
                if !self.vertices.is_empty() {
                    return Err(LabError::Validation("vertices are only allowed for kind = \"toric\"".into()));
                }
                let pts = self.log_points.iter().map(LogPointSpec::resolve).collect::<LabResult<Vec<_>>>()?;
                Ok(Space::Curve(LogSphere::new(pts)?))
            }
            SpaceKind::Toric => {
                if !self.log_points.is_empty() {
                    return Err(LabError::Validation("log_points are only allowed for kind = \"log_sphere\"".into()));
                }
                if self.vertices.is_empty() {
                    return Err(LabError::Validation("toric space needs vertices".into()));
                }
                Ok(Space::Toric(ToricFano::new(self.vertices.clone())?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub nodes: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { nodes: 401 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSettings {
    pub beta: f64,
    /// Level of the line bundle.
    pub k: u64,
    /// Particle number; when set, the basis is all monomials of degree `n - 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    pub sweeps: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub thin: usize,
    pub proposal_scale: f64,
    pub autotune: bool,
    pub energy_ceiling: f64,
    pub bands: usize,
    pub sectors: usize,
    /// Sample at `β < 0` without a passing stability check.
    pub force: bool,
}

impl Default for SampleSettings {
    fn default() -> Self {
        Self {
            beta: 1.0,
            k: 4,
            n: None,
            sweeps: 2000,
            burn_in: 200,
            chains: 1,
            thin: 1,
            proposal_scale: 0.5,
            autotune: true,
            energy_ceiling: 50.0,
            bands: 64,
            sectors: 32,
            force: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    pub beta: f64,
    pub scheme: KeScheme,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self { beta: -1.0, scheme: KeScheme::Consistent }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaSettings {
    /// Levels `1..=k` are tabulated.
    pub k: u64,
    /// Half-width of the toric search box.
    pub radius: i64,
}

impl Default for DeltaSettings {
    fn default() -> Self {
        Self { k: 5, radius: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelSettings {
    pub k: u64,
}

impl Default for LevelSettings {
    fn default() -> Self {
        Self { k: 1 }
    }
}

/// `[re, im]` or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Finite([f64; 2]),
    Named(String),
}

/// One valuation: `{ point = .., scale = "p/q" }` on curves, `{ vector = [..], scale = "p/q" }` on toric spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<PointSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<i64>>,
    #[serde(default = "one_string")]
    pub scale: String,
}

fn one_string() -> String {
    "1".into()
}

impl ValuationSpec {
    pub fn resolve(&self, space: &Space) -> LabResult<Valuation> {
        let scale = parse_rational(&self.scale)?;
        match (space, &self.point, &self.vector) {
            (Space::Curve(_), Some(p), None) => {
                let point = match p {
                    PointSpec::Finite([re, im]) => SpherePoint::finite(*re, *im),
                    PointSpec::Named(s) if s == "inf" => SpherePoint::Infinity,
                    PointSpec::Named(s) => return Err(LabError::Validation(format!("unknown point {s:?}"))),
                };
                Ok(Valuation::Curve(CurveValuation::new(point, scale)?))
            }
            (Space::Toric(_), None, Some(v)) => Ok(Valuation::Toric(ToricValuation::new(v.clone(), scale)?)),
            (Space::Curve(_), _, _) => Err(LabError::Validation("curve valuations need exactly a point".into())),
            (Space::Toric(_), _, _) => Err(LabError::Validation("toric valuations need exactly a vector".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaEnergySettings {
    pub k: u64,
    /// Factors of the product valuation, one per particle, or a single
    /// valuation used diagonally. Empty means the diagonal of the `δ_k` witness.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub valuations: Vec<ValuationSpec>,
}

impl Default for NaEnergySettings {
    fn default() -> Self {
        Self { k: 1, valuations: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSettings {
    pub betas: Vec<f64>,
    pub k: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    pub legs: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub chains: usize,
}

impl Default for PartitionSettings {
    fn default() -> Self {
        Self { betas: vec![1.0], k: 1, n: None, legs: 21, sweeps: 4000, burn_in: 400, chains: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrosscheckSettings {
    pub suite: String,
    /// Criterion ids to run; empty runs all of them.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub only: Vec<String>,
}

impl Default for CrosscheckSettings {
    fn default() -> Self {
        Self { suite: "acceptance".into(), only: Vec::new() }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> LabResult<Self> {
        toml::from_str(text).map_err(|e| LabError::Validation(format!("config: {}", e.message().replace('\n', " "))))
    }

    pub fn load(path: &std::path::Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are representable in TOML")
    }

    /// Keeps only what `command` reads, filling defaults. Fails if the file names another command.
    pub fn into_plan(self, command: CommandKind) -> LabResult<Config> {
        if let Some(c) = self.command {
            if c != command {
                return Err(LabError::Validation(format!("config is for command {c:?}, not {command:?}")));
            }
        }
        let seed = self.seed.unwrap_or(0);
        if seed > i64::MAX as u64 {
            return Err(LabError::Validation("seed must fit in a signed 64-bit integer".into()));
        }
        let mut plan = Config {
            command: Some(command),
            seed: Some(seed),
            space: Some(self.space.unwrap_or_default()),
            ..Default::default()
        };
        match command {
            CommandKind::Sample => plan.sample = Some(self.sample.unwrap_or_default()),
            CommandKind::Solve => {
                plan.grid = Some(self.grid.unwrap_or_default());
                plan.solve = Some(self.solve.unwrap_or_default());
            }
            CommandKind::Delta => plan.delta = Some(self.delta.unwrap_or_default()),
            CommandKind::LctChain => plan.lct_chain = Some(self.lct_chain.unwrap_or_default()),
            CommandKind::NaEnergy => plan.na_energy = Some(self.na_energy.unwrap_or_default()),
            CommandKind::Partition => plan.partition = Some(self.partition.unwrap_or_default()),
            CommandKind::Crosscheck => plan.crosscheck = Some(self.crosscheck.unwrap_or_default()),
        }
        Ok(plan)
    }

    pub fn seed_value(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn resolve_space(&self) -> LabResult<Space> {
        self.space.clone().unwrap_or_default().resolve()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
seed = 11

[space]
kind = "log_sphere"
log_points = [[0.0, 0.0, "3/4"], ["inf", "3/4"]]

[grid]
nodes = 101

[solve]
beta = -1.0
scheme = "lumped"
"#;

    #[test]
    fn example_parses_and_echoes() {
        let plan = Config::from_toml(EXAMPLE).unwrap().into_plan(CommandKind::Solve).unwrap();
        assert_eq!(plan.grid.as_ref().unwrap().nodes, 101);
        assert_eq!(plan.solve.as_ref().unwrap().scheme, KeScheme::Lumped);
        let back = Config::from_toml(&plan.to_toml()).unwrap();
        assert_eq!(back, plan);
        match plan.resolve_space().unwrap() {
            Space::Curve(s) => assert_eq!(s.log_points().len(), 2),
            Space::Toric(_) => panic!("expected a curve"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml("sed = 1").is_err());
        assert!(Config::from_toml("[sample]\nbetta = 1.0").is_err());
    }

    #[test]
    fn non_klt_weight_is_a_validation_error() {
        let c = Config::from_toml("[space]\nlog_points = [[0.0, 0.0, \"6/5\"]]").unwrap();
        let e = c.resolve_space().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.reason().contains("non-klt pair"));
    }

    #[test]
    fn cli_log_points() {
        assert_eq!(
            LogPointSpec::parse_cli("inf,1/2").unwrap(),
            LogPointSpec::Infinite("inf".into(), "1/2".into())
        );
        assert_eq!(
            LogPointSpec::parse_cli("2,-1,1/3").unwrap(),
            LogPointSpec::Finite(2.0, -1.0, "1/3".into())
        );
        assert!(LogPointSpec::parse_cli("2,1/3").is_err());
    }

    #[test]
    fn plans_drop_other_sections() {
        let c = Config::from_toml("[delta]\nk = 3\n[solve]\nbeta = 1.0").unwrap();
        let plan = c.into_plan(CommandKind::Delta).unwrap();
        assert!(plan.solve.is_none());
        assert_eq!(plan.delta.unwrap().k, 3);
    }
}
