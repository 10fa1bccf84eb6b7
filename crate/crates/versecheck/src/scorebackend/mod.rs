//! Token-level scoring backends.
//!
//! A scoring backend returns, for each position of a text (conditioned on
//! the true prefix), the observed token's log-probability, its rank in the
//! model's next-token ordering, and optionally the top-k next-token
//! distribution. The backend's tokenizer is authoritative; this toolkit
//! never tokenizes text itself.
//!
//! Two implementations: [`http::HttpScoreBackend`] speaks the de-facto
//! completions-with-logprobs wire shape, and [`mock::MockScoreBackend`] is
//! a deterministic in-process model whose answers are computable by hand.

pub mod http;
pub mod mock;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Score of one observed token at one position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub token_text: String,
    /// Natural-log probability of the observed token; always <= 0.
    pub logprob: f64,
    /// 1-based rank of the observed token (1 = model's most likely).
    pub rank: u32,
    /// True when the observed token fell outside the requested top-k and
    /// the rank was floored to top_k + 1.
    #[serde(default)]
    pub rank_approximate: bool,
    /// Next-token alternatives as (token_text, logprob), sorted by logprob
    /// descending, ties by token byte order.
    #[serde(default)]
    pub top_dist: Option<Vec<(String, f64)>>,
}

/// Per-token scores for one text under one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    pub model_id: String,
    /// One entry per scored position (positions 2..n of the tokenized
    /// text; the first token has no conditional and is excluded).
    pub tokens: Vec<TokenScore>,
    /// True iff every `top_dist` covers the entire vocabulary.
    pub full_vocab: bool,
}

impl SequenceScore {
    /// True when any token's rank was floored due to top-k truncation.
    pub fn has_approximate_ranks(&self) -> bool {
        self.tokens.iter().any(|t| t.rank_approximate)
    }

    /// Check the structural invariants. Backends call this before
    /// returning a score; cached scores are trusted as written.
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.tokens.is_empty() {
            return Err(ScoreError::Protocol("sequence has no scored tokens".into()));
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if !t.logprob.is_finite() || t.logprob > 0.0 {
                return Err(ScoreError::Protocol(format!(
                    "token {i}: logprob {} is not a finite non-positive value",
                    t.logprob
                )));
            }
            if t.rank < 1 {
                return Err(ScoreError::Protocol(format!("token {i}: rank must be >= 1")));
            }
            if let Some(dist) = &t.top_dist {
                let mut exp_sum = 0.0;
                let mut prev = f64::INFINITY;
                for (tok, lp) in dist {
                    if !lp.is_finite() {
                        return Err(ScoreError::Protocol(format!(
                            "token {i}: non-finite logprob for {tok:?} in top_dist"
                        )));
                    }
                    if *lp > prev {
                        return Err(ScoreError::Protocol(format!(
                            "token {i}: top_dist not sorted non-increasing"
                        )));
                    }
                    prev = *lp;
                    exp_sum += lp.exp();
                }
                if exp_sum > 1.0 + 1e-6 {
                    return Err(ScoreError::Protocol(format!(
                        "token {i}: top_dist probabilities sum to {exp_sum} > 1"
                    )));
                }
                if self.full_vocab && (exp_sum - 1.0).abs() > 1e-6 {
                    return Err(ScoreError::Protocol(format!(
                        "token {i}: full-vocab top_dist sums to {exp_sum}, expected 1"
                    )));
                }
                if let Some((_, listed)) = dist.iter().find(|(tok, _)| *tok == t.token_text) {
                    if (listed - t.logprob).abs() > 1e-6 {
                        return Err(ScoreError::Protocol(format!(
                            "token {i}: observed logprob {} disagrees with top_dist entry {}",
                            t.logprob, listed
                        )));
                    }
                    let stricter = dist.iter().filter(|(_, lp)| *lp > listed + 1e-12).count();
                    if t.rank as usize != stricter + 1 {
                        return Err(ScoreError::Protocol(format!(
                            "token {i}: rank {} inconsistent with top_dist (expected {})",
                            t.rank,
                            stricter + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Connection settings for an HTTP scoring backend. The credential is read
/// from the environment variable named by `auth_token_env` (empty = no
/// credential), never from disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub top_k: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub auth_token_env: String,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_retries() -> u32 {
    2
}

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("auth error: {0}")]
    Auth(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that can score a text. Implementations are shareable across
/// worker threads.
pub trait ScoreBackend: Send + Sync {
    fn model_id(&self) -> &str;
    /// Size of the per-position distribution this backend reports, used in
    /// cache keys.
    fn top_k(&self) -> u32;
    fn fetch(&self, text: &str) -> Result<SequenceScore, ScoreError>;
}

/// Content-addressed cache key for a scoring request.
pub fn score_cache_key(model_id: &str, top_k: u32, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(top_k.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

/// A backend plus an optional on-disk cache. With caching enabled,
/// repeated calls for the same (model, top_k, text) return value-identical
/// scores without touching the backend.
pub struct Scorer {
    backend: Arc<dyn ScoreBackend>,
    cache_dir: Option<PathBuf>,
}

impl Scorer {
    pub fn new(backend: Arc<dyn ScoreBackend>) -> Self {
        Scorer {
            backend,
            cache_dir: None,
        }
    }

    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn model_id(&self) -> &str {
        self.backend.model_id()
    }

    /// Score `text`, serving from the cache when possible.
    pub fn score_sequence(&self, text: &str) -> Result<SequenceScore, ScoreError> {
        if text.is_empty() {
            return Err(ScoreError::InvalidInput("text must be non-empty".into()));
        }
        let key = score_cache_key(self.backend.model_id(), self.backend.top_k(), text);
        if let Some(dir) = &self.cache_dir {
            let path = dir.join(format!("{key}.json"));
            if let Ok(bytes) = std::fs::read(&path) {
                if let Ok(seq) = serde_json::from_slice::<SequenceScore>(&bytes) {
                    return Ok(seq);
                }
            }
        }
        let seq = self.backend.fetch(text)?;
        seq.validate()?;
        if let Some(dir) = &self.cache_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{key}.json"));
            let tmp = dir.join(format!("{key}.json.tmp"));
            std::fs::write(&tmp, serde_json::to_vec(&seq).expect("serializable"))?;
            std::fs::rename(&tmp, &path)?;
        }
        Ok(seq)
    }
}
