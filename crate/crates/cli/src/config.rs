//! Run configuration: built-in defaults, then an optional JSON file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use ivts_core::mldfm::GlobalDynamics;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Default output directory when neither a flag nor the environment sets one.
pub const DEFAULT_OUTPUT_DIR: &str = "ivts-out";

/// Environment variable holding the default output directory.
pub const OUTPUT_DIR_ENV: &str = "IVTS_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TrendVariant {
    /// Stochastic level and slope.
    Full,
    /// Random-walk level with fixed drift.
    Rw,
    /// Integrated random walk: stochastic slope, no level disturbance.
    Irw,
    /// Deterministic linear trend.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SeasonalVariant {
    /// Separate disturbance variances for harmonic 1 and harmonics 2..6.
    TwoGroup,
    /// Fixed seasonal pattern.
    Deterministic,
}

/// Which transform of the interval series a command works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Centre,
    LogRange,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Centre => "centre",
            Mode::LogRange => "log_range",
        }
    }

    /// IRW for centres, RW for log-ranges.
    pub fn default_global(self) -> GlobalDynamics {
        match self {
            Mode::Centre => GlobalDynamics::Irw,
            Mode::LogRange => GlobalDynamics::Rw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalChoice {
    Irw,
    Rw,
}

impl From<GlobalChoice> for GlobalDynamics {
    fn from(g: GlobalChoice) -> Self {
        match g {
            GlobalChoice::Irw => GlobalDynamics::Irw,
            GlobalChoice::Rw => GlobalDynamics::Rw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationKind {
    /// Correlation after removing the global principal component.
    Residual,
    /// Plain correlation of the series.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SimModel {
    /// Independent FS-BSM series per location.
    Fsbsm,
    /// Centres and log-ranges driven by multi-level factor models.
    Mldfm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    /// Fit centre and log-range jointly (bivariate model).
    pub joint: bool,
    pub trend: TrendVariant,
    pub seasonal: SeasonalVariant,
    pub optimizer: String,
    pub fallback: Option<String>,
    pub max_iter: usize,
    pub multi_start: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            joint: false,
            trend: TrendVariant::Full,
            seasonal: SeasonalVariant::TwoGroup,
            optimizer: "bfgs".into(),
            fallback: Some("nelder-mead".into()),
            max_iter: 500,
            multi_start: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestOptions {
    /// Level test with drift (RWD) or without (RW).
    pub with_drift: bool,
    /// Replications for simulated critical values; 0 uses the built-in tables.
    pub mc_reps: usize,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            with_drift: true,
            mc_reps: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DfmOptions {
    pub mode: Mode,
    /// CSV with columns `location_id,region`.
    pub regions_file: Option<PathBuf>,
    /// Number of regions found by clustering when no regions file is given.
    pub k: Option<usize>,
    /// Defaults to IRW for centres and RW for log-ranges.
    pub global: Option<GlobalChoice>,
    /// Remove the filtered seasonal of a per-location FS-BSM first.
    pub deseasonalize: bool,
}

impl Default for DfmOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Centre,
            regions_file: None,
            k: None,
            global: None,
            deseasonalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterOptions {
    pub mode: Mode,
    pub k: Option<usize>,
    pub correlation: CorrelationKind,
    pub deseasonalize: bool,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Centre,
            k: None,
            correlation: CorrelationKind::Residual,
            deseasonalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: SimModel,
    pub n_locations: usize,
    pub n_obs: usize,
    /// First month, `YYYY-MM`.
    pub start: String,
    /// Add a deterministic annual cycle to every series.
    pub seasonal: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: SimModel::Fsbsm,
            n_locations: 4,
            n_obs: 240,
            start: "1901-01".into(),
            seasonal: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub statistics: Vec<String>,
    pub sizes: Vec<usize>,
    pub reps: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            statistics: vec!["rw".into(), "rwd".into()],
            sizes: vec![1000],
            reps: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub interpolate_gaps: bool,
    /// Root seed; every random draw of a run derives from it.
    pub seed: u64,
    /// Worker threads for per-location work (0 = one per CPU).
    pub jobs: usize,
    pub log_level: String,
    pub model: ModelOptions,
    pub tests: TestOptions,
    pub dfm: DfmOptions,
    pub cluster: ClusterOptions,
    pub simulate: SimulateConfig,
    pub mc: McConfig,
    /// Also fit models and emit component bands in `plotdata`.
    pub plot_components: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            input: None,
            output_dir: None,
            interpolate_gaps: false,
            seed: 1,
            jobs: 0,
            log_level: "info".into(),
            model: ModelOptions::default(),
            tests: TestOptions::default(),
            dfm: DfmOptions::default(),
            cluster: ClusterOptions::default(),
            simulate: SimulateConfig::default(),
            mc: McConfig::default(),
            plot_components: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// SHA-256 of the settings that affect results. The output directory,
    /// worker count and log level are left out, so moving a run elsewhere
    /// keeps its hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        c.jobs = 0;
        c.log_level = String::new();
        let canonical = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_output_location() {
        let a = RunConfig {
            output_dir: Some("x".into()),
            jobs: 3,
            ..Default::default()
        };
        let b = RunConfig {
            output_dir: Some("y".into()),
            ..Default::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig {
            seed: 2,
            ..Default::default()
        };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"seed": 7, "model": {"joint": true}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert!(c.model.joint);
        assert_eq!(c.model.trend, TrendVariant::Full);
        assert!(c.tests.with_drift);
        let bad: Result<RunConfig, _> = serde_json::from_str(r#"{"sed": 7}"#);
        assert!(bad.is_err());
    }
}
