//! Experiment configuration: a versioned JSON file describing the
//! environment, the strategies to compare, and the run shape. The loaded
//! file's SHA-256 digest is stamped into every log's metadata so results can
//! always be traced back to the exact bytes that produced them.

use crate::env::{ArrivalSchedule, EnvSpec};
use crate::runner::StrategyConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// The schema version this build reads and writes.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported config version {found}; this build reads version {CONFIG_VERSION}")]
    UnsupportedVersion { found: u32 },
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn default_replicates() -> u64 {
    1
}

fn default_min_views() -> u64 {
    1
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Schema version; must equal [`CONFIG_VERSION`].
    pub version: u32,
    /// Name stamped into log metadata and output files.
    #[serde(default)]
    pub experiment_id: Option<String>,
    /// Master seed; every stream in the run is derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Rounds per run.
    pub horizon: u64,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    pub environment: EnvSpec,
    pub strategies: Vec<StrategyConfig>,
    /// Where logs and reports land; overridable by flag or environment
    /// variable.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Minimum views for an item to enter the CTR distribution report.
    #[serde(default = "default_min_views")]
    pub min_views_for_ctr: u64,
}

impl ExperimentConfig {
    /// Field-level validation beyond what parsing enforces. Error messages
    /// name the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::UnsupportedVersion {
                found: self.version,
            });
        }
        if self.horizon == 0 {
            return Err(ConfigError::Invalid {
                field: "horizon".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.replicates == 0 {
            return Err(ConfigError::Invalid {
                field: "replicates".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.strategies.is_empty() {
            return Err(ConfigError::Invalid {
                field: "strategies".into(),
                reason: "at least one strategy is required".into(),
            });
        }
        if self.environment.num_items == 0 {
            return Err(ConfigError::Invalid {
                field: "environment.num_items".into(),
                reason: "must be at least 1".into(),
            });
        }
        let initial_pool = self.initial_pool_size()?;
        for (ix, s) in self.strategies.iter().enumerate() {
            if s.slate_size == 0 {
                return Err(ConfigError::Invalid {
                    field: format!("strategies[{ix}].slate_size"),
                    reason: "must be at least 1".into(),
                });
            }
            if s.slate_size > self.environment.num_items {
                return Err(ConfigError::Invalid {
                    field: format!("strategies[{ix}].slate_size"),
                    reason: format!(
                        "slate_size {} exceeds environment.num_items {}",
                        s.slate_size, self.environment.num_items
                    ),
                });
            }
            if s.slate_size > initial_pool {
                return Err(ConfigError::Invalid {
                    field: format!("strategies[{ix}].slate_size"),
                    reason: format!(
                        "slate_size {} exceeds the {} items available at round 0 \
                         under the arrival schedule",
                        s.slate_size, initial_pool
                    ),
                });
            }
        }
        Ok(())
    }

    /// Items available at round 0 under the arrival schedule; the pool only
    /// grows, so this is the binding constraint for slate sizes.
    fn initial_pool_size(&self) -> Result<usize, ConfigError> {
        let k = self.environment.num_items;
        Ok(match &self.environment.arrivals {
            ArrivalSchedule::AllAtZero => k,
            ArrivalSchedule::Staircase { batch, interval: _ } => {
                if *batch == 0 {
                    return Err(ConfigError::Invalid {
                        field: "environment.arrivals.batch".into(),
                        reason: "must be at least 1".into(),
                    });
                }
                (*batch).min(k)
            }
            ArrivalSchedule::Explicit { rounds } => {
                if rounds.len() != k {
                    return Err(ConfigError::Invalid {
                        field: "environment.arrivals.rounds".into(),
                        reason: format!(
                            "lists {} arrival rounds for {} items",
                            rounds.len(),
                            k
                        ),
                    });
                }
                rounds.iter().filter(|&&r| r == 0).count()
            }
        })
    }

    pub fn effective_experiment_id(&self) -> String {
        self.experiment_id.clone().unwrap_or_else(|| "experiment".into())
    }
}

/// Parse and validate config text. The digest of the exact input bytes is
/// returned alongside so callers can stamp it into metadata.
pub fn parse_config(text: &str) -> Result<(ExperimentConfig, String), ConfigError> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        // serde_json appends its own " at line X column Y"; the position is
        // carried in the structured fields instead.
        let full = e.to_string();
        let message = full
            .rfind(" at line ")
            .map_or(full.clone(), |ix| full[..ix].to_string());
        ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message,
        }
    })?;
    config.validate()?;
    Ok((config, digest_hex(text.as_bytes())))
}

/// Load a config file from disk.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, String), ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Hex-encoded SHA-256 of raw bytes.
pub fn digest_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
