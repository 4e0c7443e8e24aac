//! JSON configuration shared by the CLI and the service.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingProvider, HashedBagProvider, RemoteProvider, DEFAULT_DIM};
use crate::engine::EngineSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    Hashed {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Remote {
        url: String,
        model: String,
        dim: usize,
    },
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Hashed { dim: DEFAULT_DIM }
    }
}

impl ProviderConfig {
    pub fn build(&self) -> Arc<dyn EmbeddingProvider> {
        match self {
            ProviderConfig::Hashed { dim } => Arc::new(HashedBagProvider::new(*dim)),
            ProviderConfig::Remote { url, model, dim } => Arc::new(RemoteProvider::new(url.clone(), model.clone(), *dim)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub provider: ProviderConfig,
    #[serde(flatten)]
    pub engine: EngineSettings,
    pub catalog: Option<PathBuf>,
    pub index_dir: Option<PathBuf>,
    /// Load indexes even if their provider fingerprint differs.
    pub force: bool,
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
