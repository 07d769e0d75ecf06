//! Experiment configuration files for `mml verify --config`.

use std::fs;
use std::path::{Path, PathBuf};

use mml_core::ChainSpec;
use serde::{Deserialize, Serialize};

use crate::chainfile::{self, ChainFileError};
use crate::descriptor::{Descriptor, DescriptorError};

/// A chain named by a file path, a descriptor string or a tagged descriptor object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainSource {
    File { path: PathBuf },
    Generated(Descriptor),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chains: Vec<ChainSource>,
    /// Target sets (`J` families); empty means each suite's default sets.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_grid: Vec<u64>,
    pub trials: Option<u64>,
    pub master_seed: Option<u64>,
    pub c: Option<f64>,
    pub c2: Option<f64>,
    pub epsilon: Option<f64>,
    /// Report file; the summary is written next to it as `<stem>.summary.json`.
    pub output: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("chain {index}: {source}")]
    Chain { index: usize, source: ChainFileError },
    #[error("chain {index}: {source}")]
    Descriptor { index: usize, source: DescriptorError },
    #[error("chain {index}: {source}")]
    Generate { index: usize, source: mml_core::Error },
}

/// A chain together with the id used in reports.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedChain {
    pub id: String,
    pub spec: ChainSpec,
}

impl NamedChain {
    pub fn generated(d: &Descriptor) -> mml_core::Result<Self> {
        Ok(Self { id: d.to_string(), spec: d.build()? })
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a config; relative chain and output paths resolve against its directory.
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for c in &mut cfg.chains {
            if let ChainSource::File { path } = c {
                *path = base.join(&*path);
            }
        }
        if let Some(out) = &mut cfg.output {
            *out = base.join(&*out);
        }
        Ok(cfg)
    }

    pub fn resolve_chains(&self) -> Result<Vec<NamedChain>, ConfigError> {
        self.chains
            .iter()
            .enumerate()
            .map(|(index, source)| match source {
                ChainSource::File { path } => chainfile::read_chain(path)
                    .map(|spec| NamedChain { id: path.display().to_string(), spec })
                    .map_err(|source| ConfigError::Chain { index, source }),
                ChainSource::Generated(d) => {
                    NamedChain::generated(d).map_err(|source| ConfigError::Generate { index, source })
                }
                ChainSource::Text(s) => {
                    let d: Descriptor = s.parse().map_err(|source| ConfigError::Descriptor { index, source })?;
                    NamedChain::generated(&d).map_err(|source| ConfigError::Generate { index, source })
                }
            })
            .collect()
    }
}
