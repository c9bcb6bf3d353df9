use std::path::{Path, PathBuf};

use frontlab::solver::RunConfig;
use frontlab::voting::Estimator;
use frontlab::ModelSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::defaults;
use crate::error::{CliError, CliResult};

/// Reads a TOML or JSON config. A manifest written by an earlier run is
/// accepted as well; its echoed config is used when the subcommand matches.
pub fn load<T: DeserializeOwned>(path: &Path, subcommand: &str) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |e: String| CliError::Config(format!("{}: {e}", path.display()));
    let mut value: Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        let t: toml::Value = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        serde_json::to_value(t).map_err(|e| bad(e.to_string()))?
    };
    if let (Some(sub), Some(cfg)) = (value.get("subcommand"), value.get("config")) {
        if sub != subcommand {
            return Err(bad(format!("manifest is for '{sub}', not '{subcommand}'")));
        }
        value = cfg.clone();
    }
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedConfig {
    pub models: Vec<ModelSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub model: ModelSpec,
    #[serde(default = "wave_x_min")]
    pub x_min: f64,
    #[serde(default = "wave_x_max")]
    pub x_max: f64,
    #[serde(default = "wave_dx")]
    pub dx: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub run: RunConfig,
    /// Per-snapshot diagnostics table.
    #[serde(default = "yes")]
    pub diagnostics: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontFitConfig {
    /// Directory written by `simulate`.
    pub trajectory: PathBuf,
    #[serde(default = "fit_window")]
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    /// Directory written by `simulate`.
    pub trajectory: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RulesConfig {
    Tilted { n: usize, gamma: f64, beta: f64 },
    Majority { n: usize, beta: f64 },
    Custom { mu: Vec<f64>, beta: f64 },
}

impl Default for RulesConfig {
    fn default() -> Self {
        RulesConfig::Tilted {
            n: 2,
            gamma: defaults::VOTING_GAMMA,
            beta: 1.0,
        }
    }
}

/// Grid of the PDE solved alongside the Monte Carlo estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeComparison {
    pub dx: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VotingConfig {
    #[serde(default)]
    pub rules: RulesConfig,
    pub t: f64,
    pub xs: Vec<f64>,
    /// Leaves vote 1 when `x ≤ step_at`.
    #[serde(default)]
    pub step_at: f64,
    #[serde(default = "voting_paths")]
    pub n_paths: usize,
    #[serde(default = "seed")]
    pub seed: u64,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub compare_pde: Option<PdeComparison>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    /// Values of `χ` substituted into the base model.
    pub chi: Vec<f64>,
    /// Equations to run for every `χ`; the base equation when empty.
    #[serde(default)]
    pub equations: Vec<String>,
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
}

fn wave_x_min() -> f64 {
    defaults::WAVE_X_MIN
}
fn wave_x_max() -> f64 {
    defaults::WAVE_X_MAX
}
fn wave_dx() -> f64 {
    defaults::WAVE_DX
}
fn yes() -> bool {
    true
}
fn fit_window() -> (f64, f64) {
    defaults::FIT_WINDOW
}
fn voting_paths() -> usize {
    defaults::VOTING_PATHS
}
fn seed() -> u64 {
    defaults::SEED
}
