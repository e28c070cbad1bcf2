//! Experiment configuration files (JSON).

use std::path::{Path, PathBuf};

use halo_core::{ClusterSpec, GroupSpec, PolicyName, ServiceDistribution, SimConfig};
use serde::Deserialize;
use thiserror::Error;

pub const SEED_ENV: &str = "HALOSIM_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Validation { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum LambdaSpec {
    List(Vec<f64>),
    Sweep(LinearSweep),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearSweep {
    from: f64,
    to: f64,
    steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    groups: Vec<GroupSpec>,
    lambdas: LambdaSpec,
    policies: Vec<PolicyName>,
    #[serde(default)]
    service: ServiceDistribution,
    #[serde(default)]
    sim: SimConfig,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Scenario name used in tables and chart file names (the config file stem).
    pub label: String,
    pub cluster: ClusterSpec,
    pub lambdas: Vec<f64>,
    pub policies: Vec<PolicyName>,
    pub service: ServiceDistribution,
    pub sim: SimConfig,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parses and validates a config document. `label` names the scenario.
    pub fn from_json(text: &str, label: &str, path: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let invalid = |message: String| ConfigError::Validation {
            path: path.to_path_buf(),
            message,
        };

        let cluster = ClusterSpec::new(raw.groups).map_err(|e| invalid(format!("groups: {e}")))?;
        let lambdas = match raw.lambdas {
            LambdaSpec::List(list) => list,
            LambdaSpec::Sweep(LinearSweep { from, to, steps }) => {
                if steps == 0 {
                    return Err(invalid("lambdas.steps must be at least 1".into()));
                }
                if steps == 1 {
                    vec![from]
                } else {
                    (0..steps)
                        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
                        .collect()
                }
            }
        };
        if lambdas.is_empty() {
            return Err(invalid("lambdas: at least one arrival rate is required".into()));
        }
        let capacity = cluster.total_capacity();
        for &lambda in &lambdas {
            if !(lambda.is_finite() && lambda > 0.0 && lambda < capacity) {
                return Err(invalid(format!(
                    "lambdas: {lambda} must satisfy 0 < lambda < capacity {capacity}"
                )));
            }
        }
        if raw.policies.is_empty() {
            return Err(invalid("policies: at least one policy is required".into()));
        }
        raw.service
            .validate()
            .map_err(|e| invalid(format!("service: {e}")))?;
        raw.sim.validate().map_err(|e| invalid(format!("sim: {e}")))?;

        Ok(Self {
            label: label.to_string(),
            cluster,
            lambdas,
            policies: raw.policies,
            service: raw.service,
            sim: raw.sim,
            output_dir: raw.output_dir,
        })
    }

    /// Replaces the seed, for command-line and environment overrides.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self
    }
}

/// Reads, parses and validates a config file. The file stem becomes the label.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    ExperimentConfig::from_json(&text, &label, path)
}

/// Seed override from `HALOSIM_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| ConfigError::Validation {
            path: PathBuf::from(SEED_ENV),
            message: format!("{v:?} is not an unsigned 64-bit integer"),
        }),
        Err(_) => Ok(None),
    }
}
