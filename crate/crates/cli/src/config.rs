//! Run configuration: one structured file, overridable by flags.
//!
//! The file is TOML. Pipeline settings sit at the top level next to the
//! corpus and taxonomy paths, so a minimal run config is three lines:
//!
//! ```toml
//! corpus = "questions.tsv"
//! taxonomy = "taxonomy.txt"
//! seed = 42
//! ```
//!
//! The seed has no default on purpose: every run must name one, so no
//! run ever depends on wall-clock state.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use hqc_core::PipelineConfig;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Corpus file, one labeled question per line.
    pub corpus: PathBuf,
    /// Taxonomy file naming the coarse and finer classes.
    pub taxonomy: PathBuf,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Where `train` writes the model bundle and `predict` reads it.
    #[serde(default = "default_model_path")]
    pub model: PathBuf,
    /// Where `evaluate` writes the machine-readable report.
    #[serde(default = "default_report_path")]
    pub report: PathBuf,
}

fn default_model_path() -> PathBuf {
    PathBuf::from("model.hqc")
}

fn default_report_path() -> PathBuf {
    PathBuf::from("report.tsv")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            model: default_model_path(),
            report: default_report_path(),
        }
    }
}

/// Flag overrides applied on top of the config file.
#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// Corpus file path.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Taxonomy file path.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Root seed for every random substream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of cross-validation folds.
    #[arg(long)]
    pub k_folds: Option<usize>,
    /// Vocabulary frequency cut.
    #[arg(long)]
    pub min_count: Option<u64>,
    /// Model bundle path.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Machine-readable report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Train stage one on the raw class balance.
    #[arg(long)]
    pub no_smote: bool,
}

impl RunConfig {
    /// Load the file, apply flag overrides, and validate settings.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;

        if let Some(corpus) = &overrides.corpus {
            config.corpus = corpus.clone();
        }
        if let Some(taxonomy) = &overrides.taxonomy {
            config.taxonomy = taxonomy.clone();
        }
        if let Some(seed) = overrides.seed {
            config.pipeline.seed = seed;
        }
        if let Some(k_folds) = overrides.k_folds {
            config.pipeline.k_folds = k_folds;
        }
        if let Some(min_count) = overrides.min_count {
            config.pipeline.min_count = min_count;
        }
        if let Some(model) = &overrides.model {
            config.output.model = model.clone();
        }
        if let Some(report) = &overrides.report {
            config.output.report = report.clone();
        }
        if overrides.no_smote {
            config.pipeline.smote.enabled = false;
        }

        config.pipeline.validate()?;
        Ok(config)
    }
}
