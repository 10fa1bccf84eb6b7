//! Run configuration: a single TOML file describing the corpus, the
//! train/test split, named backends with role bindings, the detectors to
//! run, and the judge setup. Every run copies its resolved config into the
//! output directory and stamps outputs with the config digest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::genkit::ImageBackendConfig;
use crate::judge::backend::ChatBackendConfig;
use crate::judge::{PromptKind, PromptLanguage};
use crate::scorebackend::mock::MockSpec;
use crate::scorebackend::BackendConfig;
use crate::statdetect::Detector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            seed: 7,
            train_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub kind: PromptKind,
    /// Fixed example pair for TP2/IP2/IP3; defaults to the
    /// lexicographically smallest train pair id.
    #[serde(default)]
    pub example_pair_id: Option<String>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub language: PromptLanguage,
}

fn default_parallelism() -> usize {
    2
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            kind: PromptKind::Tp1,
            example_pair_id: None,
            parallelism: default_parallelism(),
            language: PromptLanguage::default(),
        }
    }
}

/// One named backend. HTTP entries carry their connection settings
/// inline; mock entries are deterministic in-process stand-ins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackendEntry {
    ScoringHttp(BackendConfig),
    ScoringMock { spec: MockSpec },
    ChatHttp(ChatBackendConfig),
    ChatMock {
        /// Responses picked per request digest (stable under
        /// parallelism). A single entry answers everything.
        responses: Vec<String>,
    },
    ImageHttp(ImageBackendConfig),
    ImageMock,
}

/// Role bindings into the named backend table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Roles {
    /// Scoring model for log-likelihood, log-rank, LRR and curvature.
    #[serde(default)]
    pub scoring: Option<String>,
    /// Observer model for the perplexity-ratio detector.
    #[serde(default)]
    pub observer: Option<String>,
    /// Performer model for the perplexity-ratio detector.
    #[serde(default)]
    pub performer: Option<String>,
    /// Chat model for judging and poem generation.
    #[serde(default)]
    pub chat: Option<String>,
    /// Text-to-image model.
    #[serde(default)]
    pub image: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus_root: PathBuf,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "all_detectors")]
    pub detectors: Vec<Detector>,
    #[serde(default)]
    pub judge: JudgeConfig,
    #[serde(default)]
    pub backends: BTreeMap<String, BackendEntry>,
    #[serde(default)]
    pub roles: Roles,
}

fn all_detectors() -> Vec<Detector> {
    Detector::all().to_vec()
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "split.train_fraction {} must be strictly between 0 and 1",
                self.split.train_fraction
            )));
        }
        if self.judge.parallelism < 1 {
            return Err(ConfigError::Invalid("judge.parallelism must be >= 1".into()));
        }
        let check = |role: &str, name: &Option<String>, accepts: fn(&BackendEntry) -> bool| {
            if let Some(name) = name {
                match self.backends.get(name) {
                    None => Err(ConfigError::Invalid(format!(
                        "role {role} references unknown backend {name:?}"
                    ))),
                    Some(entry) if !accepts(entry) => Err(ConfigError::Invalid(format!(
                        "backend {name:?} has the wrong type for role {role}"
                    ))),
                    Some(_) => Ok(()),
                }
            } else {
                Ok(())
            }
        };
        let is_scoring =
            |e: &BackendEntry| matches!(e, BackendEntry::ScoringHttp(_) | BackendEntry::ScoringMock { .. });
        let is_chat =
            |e: &BackendEntry| matches!(e, BackendEntry::ChatHttp(_) | BackendEntry::ChatMock { .. });
        let is_image =
            |e: &BackendEntry| matches!(e, BackendEntry::ImageHttp(_) | BackendEntry::ImageMock);
        check("scoring", &self.roles.scoring, is_scoring)?;
        check("observer", &self.roles.observer, is_scoring)?;
        check("performer", &self.roles.performer, is_scoring)?;
        check("chat", &self.roles.chat, is_chat)?;
        check("image", &self.roles.image, is_image)?;
        for entry in self.backends.values() {
            if let BackendEntry::ChatMock { responses } = entry {
                if responses.is_empty() {
                    return Err(ConfigError::Invalid(
                        "chat_mock backend needs at least one response".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Stable digest of the resolved configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("serializable");
        let mut hasher = Sha256::new();
        hasher.update(&canonical);
        hex::encode(&hasher.finalize()[..12])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("serializable")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.corpus_root.join("manifest.jsonl")
    }
}
