//! Run configuration: a TOML file with a flat top level plus `[data]` and
//! `[hyper]` sections. Every key is optional and falls back to the
//! published defaults; unknown keys are rejected so typos fail loudly.
//! Command-line flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use genma::layers::Combine;
use genma::models::{Architecture, ModelSpec};
use genma::train::TrainConfig;
use serde::{Deserialize, Serialize};

/// Which model family a run trains or evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Genma,
    #[value(name = "charcnn")]
    CharCnn,
    Svm,
}

/// Input corpus paths, all in SentiMix format.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
}

/// Model and optimizer hyperparameters. The defaults are the published
/// ones: 32 filters with kernel 3, pool 3, BiLSTM hidden size 100, dense 32,
/// dropout 0.5, learning rate 0.0001, batch size 10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyper {
    /// Learned embedding width (genma only; charcnn embeds one-hot).
    pub embedding: usize,
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub lstm_hidden: usize,
    pub dense: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Early-stopping patience, in epochs without validation improvement.
    pub patience: usize,
    /// SVM regularization strength.
    pub lambda: f64,
    /// Minimum token length kept by the TF-IDF tokenizer.
    pub min_token_len: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            embedding: 50,
            filters: 32,
            kernel: 3,
            pool: 3,
            lstm_hidden: 100,
            dense: 32,
            dropout: 0.5,
            lr: 0.0001,
            batch: 10,
            epochs: 10,
            patience: 3,
            lambda: 1e-4,
            min_token_len: 2,
        }
    }
}

/// One full run description: model family, data paths, hyperparameters,
/// seed, and output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelKind,
    pub seed: u64,
    /// Directory where checkpoints, history, and reports are written.
    pub out: PathBuf,
    /// Maximum tweet length in characters; shorter tweets are padded.
    pub max_len: usize,
    pub data: DataPaths,
    pub hyper: Hyper,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Genma,
            seed: 7,
            out: PathBuf::from("runs"),
            max_len: 280,
            data: DataPaths::default(),
            hyper: Hyper::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("{}", e.message()))
    }

    // Only tests serialize configs today, but parse → serialize → parse
    // identity is part of the config contract, so the inverse stays close
    // to `from_toml`.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serialize config")
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read config `{}`", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("config `{}`", path.display()))
    }

    /// The architecture description this configuration asks for; only
    /// meaningful for the neural models.
    pub fn model_spec(&self, vocab_size: usize) -> Result<ModelSpec> {
        let h = &self.hyper;
        let spec = match self.model {
            ModelKind::Genma => ModelSpec {
                architecture: Architecture::Genma,
                vocab_size,
                max_len: self.max_len,
                embedding_dim: h.embedding,
                conv: vec![(h.filters, h.kernel); 2],
                pool: h.pool,
                lstm_hidden: h.lstm_hidden,
                combine: Combine::Concat,
                dense: h.dense,
                dropout: h.dropout,
            },
            ModelKind::CharCnn => ModelSpec {
                architecture: Architecture::CharCnn,
                vocab_size,
                max_len: self.max_len,
                embedding_dim: vocab_size,
                conv: vec![(h.filters, h.kernel); 4],
                pool: h.pool,
                lstm_hidden: h.lstm_hidden,
                combine: Combine::Concat,
                dense: h.dense,
                dropout: h.dropout,
            },
            ModelKind::Svm => anyhow::bail!("the svm model has no neural architecture"),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.hyper.batch,
            epochs: self.hyper.epochs,
            seed: self.seed,
            lr: self.hyper.lr,
            patience: self.hyper.patience,
            shuffle: true,
        }
    }
}
