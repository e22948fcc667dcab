//! Declarative experiment config. One TOML file names the models, the
//! treatments, the replication count, seeds, and limits; CLI flags override
//! the scalar fields. Credentials are named here (env var names), never held.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use standoff_core::agents::PolicySpec;
use standoff_core::game::Treatment;

use crate::gateway::ProviderSpec;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Scripted {
        id: String,
        policy: PolicySpec,
    },
    Remote {
        id: String,
        #[serde(flatten)]
        provider: ProviderSpec,
    },
}

impl ModelConfig {
    pub fn id(&self) -> &str {
        match self {
            ModelConfig::Scripted { id, .. } | ModelConfig::Remote { id, .. } => id,
        }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, ModelConfig::Remote { .. })
    }
}

fn default_replications() -> u32 {
    20
}

fn default_concurrency() -> usize {
    2
}

fn default_treatments() -> Vec<String> {
    Treatment::ALL.iter().map(|t| t.as_str().to_string()).collect()
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_treatments")]
    pub treatments: Vec<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Append-only JSONL of every raw completion; defaults to
    /// audit.jsonl under the output directory when remote models run.
    #[serde(default)]
    pub audit_log: Option<PathBuf>,
    pub models: Vec<ModelConfig>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("unknown treatment {0:?}")]
    UnknownTreatment(String),
    #[error("config names no models")]
    NoModels,
    #[error("model {model}: {detail}")]
    BadProvider { model: String, detail: String },
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config: ExperimentConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source: Box::new(source),
    })?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.models.is_empty() {
            return Err(ConfigError::NoModels);
        }
        for name in &self.treatments {
            if Treatment::from_str_loose(name).is_none() {
                return Err(ConfigError::UnknownTreatment(name.clone()));
            }
        }
        for model in &self.models {
            if let ModelConfig::Remote { id, provider } = model {
                provider.validate().map_err(|detail| ConfigError::BadProvider {
                    model: id.clone(),
                    detail,
                })?;
            }
        }
        Ok(())
    }

    pub fn parsed_treatments(&self) -> Vec<Treatment> {
        self.treatments
            .iter()
            .map(|name| Treatment::from_str_loose(name).expect("validated"))
            .collect()
    }

    pub fn has_remote_models(&self) -> bool {
        self.models.iter().any(ModelConfig::is_remote)
    }
}
