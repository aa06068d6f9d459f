//! Pipeline configuration: one struct covering every stage, with a
//! content fingerprint so model bundles can name the exact settings that
//! produced them. The seed is mandatory; nothing falls back to wall-clock
//! entropy.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cnn::{CnnArchitecture, TrainConfig};
use crate::embedding::EmbeddingConfig;
use crate::error::{Error, Result};
use crate::sgd_linear::SgdConfig;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SmoteConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_smote_k")]
    pub k: usize,
    /// Record synthetic-sample provenance for inspection.
    #[serde(default)]
    pub debug: bool,
}

fn default_true() -> bool {
    true
}
fn default_smote_k() -> usize {
    5
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            k: default_smote_k(),
            debug: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct CnnSettings {
    #[serde(default)]
    pub arch: CnnArchitecture,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PipelineConfig {
    /// Root of every random substream in a run.
    pub seed: u64,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    /// Tokens below this corpus frequency collapse to UNK.
    #[serde(default = "default_min_count")]
    pub min_count: u64,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub smote: SmoteConfig,
    #[serde(default)]
    pub cnn: CnnSettings,
    #[serde(default)]
    pub sgd: SgdConfig,
}

fn default_k_folds() -> usize {
    10
}
fn default_min_count() -> u64 {
    15
}

impl PipelineConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            k_folds: default_k_folds(),
            min_count: default_min_count(),
            embedding: EmbeddingConfig::default(),
            smote: SmoteConfig::default(),
            cnn: CnnSettings::default(),
            sgd: SgdConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::Config("k_folds must be at least 2".into()));
        }
        if self.smote.k == 0 {
            return Err(Error::Config("smote.k must be at least 1".into()));
        }
        if self.embedding.dim == 0 || self.embedding.max_len == 0 {
            return Err(Error::Config(
                "embedding.dim and embedding.max_len must be >= 1".into(),
            ));
        }
        if self.embedding.epochs == 0 {
            return Err(Error::Config("embedding.epochs must be >= 1".into()));
        }
        self.cnn.arch.validate()
    }

    /// Hex SHA-256 of the canonical JSON form. Two configs fingerprint
    /// equal exactly when every effective setting matches.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}
