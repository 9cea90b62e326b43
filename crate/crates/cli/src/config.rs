//! Run configuration: the TOML document and its command-line overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use skipfree::oracle::DEFAULT_LEAF_BUDGET;
use skipfree::pmf::{family_pmf, ClaimPmf, Family, PerturbationPmf};
use skipfree::ruin::CrossingQuery;
use skipfree::walk::{default_horizon, validate_model, MonteCarlo, RiskModelSpec, ValidModel};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub verify: Vec<VerifySection>,
    pub simulate: Option<SimulateSection>,
    pub identities: Option<IdentitiesSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    UnitDrift,
    Perturbed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub portfolios: Vec<Family>,
    pub perturbation: Option<Family>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub trials: u64,
    /// Monte Carlo horizon; derived from the model when absent.
    pub horizon: Option<u64>,
    /// Enumeration horizon; the oracle is skipped when absent.
    pub oracle_horizon: Option<u64>,
    pub oracle_budget: u64,
    pub master_seed: u64,
    /// Worker threads; automatic when absent.
    pub workers: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            horizon: None,
            oracle_horizon: None,
            oracle_budget: DEFAULT_LEAF_BUDGET,
            master_seed: 0,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    PortfolioJump,
    PortfolioTail,
    PerturbedClaimJump,
}

/// One query family; the listed values are expanded as a cartesian product.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub kind: QueryKind,
    #[serde(default)]
    pub portfolios: Vec<usize>,
    pub xs: Vec<i64>,
    #[serde(default)]
    pub ys: Vec<i64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub capitals: Vec<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesSection {
    pub ballot: Option<BallotSuite>,
    pub rotations: Option<RotationSuite>,
    pub kemperman: Option<KempermanSuite>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallotSuite {
    pub increments: Vec<Family>,
    pub max_n: u64,
    #[serde(default = "ballot_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSuite {
    pub entries: Vec<i64>,
    pub max_len: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KempermanSuite {
    pub increments: Vec<Family>,
    pub max_k: i64,
    pub max_n: u64,
    #[serde(default = "kemperman_tolerance")]
    pub tolerance: f64,
}

fn ballot_tolerance() -> f64 {
    1e-9
}

fn kemperman_tolerance() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    /// JSON Lines, one object per row.
    Structured,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "structured" => Ok(Self::Structured),
            _ => Err(format!("unknown format {s:?} (expected csv or structured)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleHorizon {
    Off,
    Steps(u64),
}

impl FromStr for OracleHorizon {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "off" {
            return Ok(Self::Off);
        }
        s.parse()
            .map(Self::Steps)
            .map_err(|_| format!("expected a step count or \"off\", got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workers {
    Auto,
    Count(usize),
}

impl FromStr for Workers {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        match s.parse() {
            Ok(0) | Err(_) => Err(format!("expected a positive count or \"auto\", got {s:?}")),
            Ok(n) => Ok(Self::Count(n)),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub horizon: Option<u64>,
    pub oracle_horizon: Option<OracleHorizon>,
    pub workers: Option<Workers>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub timing: bool,
}

/// Config with overrides applied.
#[derive(Debug, Clone)]
pub struct Settings {
    pub config: RunConfig,
    pub trials: u64,
    pub horizon: Option<u64>,
    pub oracle_horizon: Option<u64>,
    pub oracle_budget: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub timing: bool,
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

impl Settings {
    pub fn new(config: RunConfig, overrides: Overrides) -> Result<Self, CliError> {
        let run = &config.run;
        let trials = overrides.trials.unwrap_or(run.trials);
        let horizon = overrides.horizon.or(run.horizon);
        let oracle_horizon = match overrides.oracle_horizon {
            Some(OracleHorizon::Off) => None,
            Some(OracleHorizon::Steps(h)) => Some(h),
            None => run.oracle_horizon,
        };
        let workers = match overrides.workers {
            Some(Workers::Auto) => 0,
            Some(Workers::Count(n)) => n,
            None => run.workers.unwrap_or(0),
        };
        if trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if horizon == Some(0) || oracle_horizon == Some(0) {
            return Err(CliError::Config("horizons must be at least 1".into()));
        }
        if run.workers == Some(0) {
            return Err(CliError::Config(
                "workers must be at least 1 (omit for automatic)".into(),
            ));
        }
        Ok(Self {
            trials,
            horizon,
            oracle_horizon,
            oracle_budget: run.oracle_budget,
            master_seed: overrides.seed.unwrap_or(run.master_seed),
            workers,
            out: overrides.out.or_else(|| config.output.path.clone()),
            format: overrides
                .format
                .or(config.output.format)
                .unwrap_or_default(),
            timing: overrides.timing,
            config,
        })
    }

    /// The configured model, unvalidated.
    pub fn model_spec(&self) -> Result<RiskModelSpec, CliError> {
        let model = self
            .config
            .model
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [model] section".into()))?;
        let portfolios = model
            .portfolios
            .iter()
            .map(|f| family_pmf(f).and_then(ClaimPmf::new))
            .collect::<skipfree::Result<Vec<_>>>()
            .map_err(CliError::config)?;
        match (model.kind, &model.perturbation) {
            (ModelKind::UnitDrift, None) => Ok(RiskModelSpec::unit_drift(portfolios)),
            (ModelKind::UnitDrift, Some(_)) => Err(CliError::Config(
                "unit_drift model takes no perturbation".into(),
            )),
            (ModelKind::Perturbed, Some(f)) => {
                let z = family_pmf(f)
                    .and_then(PerturbationPmf::new)
                    .map_err(CliError::config)?;
                Ok(RiskModelSpec::perturbed(portfolios, z))
            }
            (ModelKind::Perturbed, None) => Err(CliError::Config(
                "perturbed model needs a perturbation".into(),
            )),
        }
    }

    /// The configured model after the net profit check.
    pub fn model(&self) -> Result<ValidModel, CliError> {
        Ok(validate_model(self.model_spec()?)?)
    }

    pub fn monte_carlo(&self, model: &ValidModel) -> MonteCarlo {
        MonteCarlo {
            trials: self.trials,
            horizon: self.horizon.unwrap_or_else(|| default_horizon(model)),
            master_seed: self.master_seed,
            workers: self.workers,
        }
    }

    /// Expands the `[[verify]]` sections into queries.
    pub fn queries(&self) -> Result<Vec<CrossingQuery>, CliError> {
        let mut out = Vec::new();
        for section in &self.config.verify {
            if section.xs.iter().any(|&x| x < 1) {
                return Err(CliError::Config("verify xs must be >= 1".into()));
            }
            if section.ys.iter().any(|&y| y > 0) {
                return Err(CliError::Config("verify ys must be <= 0".into()));
            }
            if section.portfolios.iter().any(|&i| i < 1) {
                return Err(CliError::Config("verify portfolios are 1-based".into()));
            }
            match section.kind {
                QueryKind::PortfolioJump => {
                    for &portfolio in &section.portfolios {
                        for &x in &section.xs {
                            for &y in &section.ys {
                                out.push(CrossingQuery::PortfolioJump { portfolio, x, y });
                            }
                        }
                    }
                }
                QueryKind::PortfolioTail => {
                    if !section.ys.is_empty() {
                        return Err(CliError::Config("portfolio_tail takes no ys".into()));
                    }
                    for &portfolio in &section.portfolios {
                        for &x in &section.xs {
                            out.push(CrossingQuery::PortfolioTail { portfolio, x });
                        }
                    }
                }
                QueryKind::PerturbedClaimJump => {
                    if !section.portfolios.is_empty() {
                        return Err(CliError::Config(
                            "perturbed_claim_jump takes no portfolios".into(),
                        ));
                    }
                    for &x in &section.xs {
                        for &y in &section.ys {
                            out.push(CrossingQuery::PerturbedClaimJump { x, y });
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(CliError::Config(
                "no verification queries configured".into(),
            ));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1

[model]
kind = "unit_drift"
portfolios = [{ family = "table", entries = [[0, 0.8], [2, 0.2]] }]

[[verify]]
kind = "portfolio_jump"
portfolios = [1]
xs = [1, 2]
ys = [0, -1]
"#;

    #[test]
    fn parses_and_expands() {
        let settings = Settings::new(parse_config(MINIMAL).unwrap(), Overrides::default()).unwrap();
        assert_eq!(settings.trials, 1_000_000);
        assert_eq!(settings.queries().unwrap().len(), 4);
        assert!(settings.model().is_ok());
    }

    #[test]
    fn overrides_win() {
        let overrides = Overrides {
            seed: Some(9),
            trials: Some(10),
            oracle_horizon: Some(OracleHorizon::Steps(4)),
            workers: Some(Workers::Count(2)),
            format: Some(Format::Structured),
            ..Overrides::default()
        };
        let s = Settings::new(parse_config(MINIMAL).unwrap(), overrides).unwrap();
        assert_eq!(
            (s.master_seed, s.trials, s.oracle_horizon, s.workers),
            (9, 10, Some(4), 2)
        );
        assert_eq!(s.format, Format::Structured);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(parse_config("schema_version = 2").is_err());
        assert!(parse_config("schema_version = 1\nunknown = 3").is_err());
        let bad_y = MINIMAL.replace("ys = [0, -1]", "ys = [1]");
        let s = Settings::new(parse_config(&bad_y).unwrap(), Overrides::default()).unwrap();
        assert!(s.queries().is_err());
    }

    #[test]
    fn flag_values() {
        assert_eq!("off".parse::<OracleHorizon>().unwrap(), OracleHorizon::Off);
        assert_eq!(
            "12".parse::<OracleHorizon>().unwrap(),
            OracleHorizon::Steps(12)
        );
        assert_eq!("auto".parse::<Workers>().unwrap(), Workers::Auto);
        assert!("0".parse::<Workers>().is_err());
        assert!("xml".parse::<Format>().is_err());
    }
}
