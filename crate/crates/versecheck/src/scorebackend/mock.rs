//! Deterministic in-process scoring backend for oracle tests and offline
//! runs.
//!
//! The mock tokenizes per character. A table spec maps a context class
//! (the previous token, or any context) to an explicit next-token
//! probability vector, so every score it returns can be computed by hand.
//! A hashed spec buckets arbitrary characters into a fixed synthetic
//! vocabulary and derives each context's distribution from a seed, which
//! gives deterministic, varied scores over text the table form cannot
//! cover (e.g. full Chinese poems).

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ScoreBackend, ScoreError, SequenceScore, TokenScore};

/// Specification of a mock model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockSpec {
    /// Explicit distribution table over a single-character vocabulary.
    Table {
        /// Token texts; each must be exactly one character.
        vocab: Vec<String>,
        /// Distribution used when no `after` row matches.
        any: Vec<f64>,
        /// Context-specific rows keyed by the previous token.
        #[serde(default)]
        after: BTreeMap<String, Vec<f64>>,
    },
    /// Synthetic model over `vocab_size` buckets; characters are hashed
    /// into buckets and each context's distribution is derived from the
    /// seed. Accepts any input text.
    Hashed { vocab_size: usize, seed: u64 },
}

impl MockSpec {
    /// Table spec with one context-free row.
    pub fn table(vocab: Vec<String>, probs: Vec<f64>) -> MockSpec {
        MockSpec::Table {
            vocab,
            any: probs,
            after: BTreeMap::new(),
        }
    }

    /// Uniform distribution over the first `n` lowercase ASCII letters.
    pub fn uniform(n: usize) -> MockSpec {
        let vocab: Vec<String> = ('a'..).take(n).map(|c| c.to_string()).collect();
        MockSpec::table(vocab, vec![1.0 / n as f64; n])
    }

    /// Point mass: the single-token vocabulary `[tok]` with probability 1.
    pub fn point_mass(tok: char) -> MockSpec {
        MockSpec::table(vec![tok.to_string()], vec![1.0])
    }
}

/// Build a mock backend, validating that every probability vector sums to
/// 1 within 1e-9.
pub fn make_mock_backend(spec: MockSpec) -> Result<MockScoreBackend, ScoreError> {
    MockScoreBackend::new(spec)
}

#[derive(Debug)]
pub struct MockScoreBackend {
    spec: MockSpec,
    model_id: String,
    calls: AtomicUsize,
}

impl MockScoreBackend {
    pub fn new(spec: MockSpec) -> Result<MockScoreBackend, ScoreError> {
        match &spec {
            MockSpec::Table { vocab, any, after } => {
                if vocab.is_empty() {
                    return Err(ScoreError::InvalidDistribution("empty vocabulary".into()));
                }
                for tok in vocab {
                    if tok.chars().count() != 1 {
                        return Err(ScoreError::InvalidDistribution(format!(
                            "vocabulary token {tok:?} must be a single character"
                        )));
                    }
                }
                validate_row(vocab.len(), any)?;
                for (ctx, row) in after {
                    if !vocab.contains(ctx) {
                        return Err(ScoreError::InvalidDistribution(format!(
                            "context token {ctx:?} not in vocabulary"
                        )));
                    }
                    validate_row(vocab.len(), row)?;
                }
            }
            MockSpec::Hashed { vocab_size, .. } => {
                if *vocab_size < 2 {
                    return Err(ScoreError::InvalidDistribution(
                        "hashed mock needs vocab_size >= 2".into(),
                    ));
                }
            }
        }
        // The id carries a digest of the full spec so different mock
        // models never share cache entries.
        let model_id = match &spec {
            MockSpec::Table { vocab, .. } => {
                format!("mock-table-{}-{}", vocab.len(), spec_digest(&spec))
            }
            MockSpec::Hashed { vocab_size, seed } => format!("mock-hashed-{vocab_size}-{seed}"),
        };
        Ok(MockScoreBackend {
            spec,
            model_id,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn with_model_id(mut self, id: impl Into<String>) -> Self {
        self.model_id = id.into();
        self
    }

    /// Number of fetches served (cache hits bypass the backend).
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn score_table(
        &self,
        vocab: &[String],
        any: &[f64],
        after: &BTreeMap<String, Vec<f64>>,
        text: &str,
    ) -> Result<SequenceScore, ScoreError> {
        let chars: Vec<String> = text.chars().map(|c| c.to_string()).collect();
        if chars.len() < 2 {
            return Err(ScoreError::InvalidInput(
                "need at least two tokens to score a conditional".into(),
            ));
        }
        let index_of = |tok: &str| -> Result<usize, ScoreError> {
            vocab.iter().position(|v| v == tok).ok_or_else(|| {
                ScoreError::InvalidInput(format!("token {tok:?} not in mock vocabulary"))
            })
        };
        let mut tokens = Vec::with_capacity(chars.len() - 1);
        for i in 1..chars.len() {
            let prev = &chars[i - 1];
            index_of(prev)?;
            let row: &[f64] = after.get(prev).map(Vec::as_slice).unwrap_or(any);
            let observed = index_of(&chars[i])?;
            tokens.push(token_from_row(vocab, row, observed)?);
        }
        Ok(SequenceScore {
            model_id: self.model_id.clone(),
            tokens,
            full_vocab: true,
        })
    }

    fn score_hashed(
        &self,
        vocab_size: usize,
        seed: u64,
        text: &str,
    ) -> Result<SequenceScore, ScoreError> {
        let buckets: Vec<usize> = text.chars().map(|c| bucket_of(c, vocab_size)).collect();
        if buckets.len() < 2 {
            return Err(ScoreError::InvalidInput(
                "need at least two tokens to score a conditional".into(),
            ));
        }
        let vocab: Vec<String> = (0..vocab_size).map(|i| format!("t{i:02}")).collect();
        let mut tokens = Vec::with_capacity(buckets.len() - 1);
        for i in 1..buckets.len() {
            let row = hashed_row(seed, buckets[i - 1], vocab_size);
            tokens.push(token_from_row(&vocab, &row, buckets[i])?);
        }
        Ok(SequenceScore {
            model_id: self.model_id.clone(),
            tokens,
            full_vocab: true,
        })
    }
}

impl ScoreBackend for MockScoreBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn top_k(&self) -> u32 {
        match &self.spec {
            MockSpec::Table { vocab, .. } => vocab.len() as u32,
            MockSpec::Hashed { vocab_size, .. } => *vocab_size as u32,
        }
    }

    fn fetch(&self, text: &str) -> Result<SequenceScore, ScoreError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.spec {
            MockSpec::Table { vocab, any, after } => self.score_table(vocab, any, after, text),
            MockSpec::Hashed { vocab_size, seed } => self.score_hashed(*vocab_size, *seed, text),
        }
    }
}

fn validate_row(vocab_len: usize, row: &[f64]) -> Result<(), ScoreError> {
    if row.len() != vocab_len {
        return Err(ScoreError::InvalidDistribution(format!(
            "row has {} entries for a {vocab_len}-token vocabulary",
            row.len()
        )));
    }
    if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(ScoreError::InvalidDistribution(
            "probabilities must be finite and non-negative".into(),
        ));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ScoreError::InvalidDistribution(format!(
            "probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Score one position given the context's distribution row.
///
/// Rank is 1 + the number of vocabulary tokens with strictly greater
/// probability: the observed token takes the best rank within its tie
/// group. The listed distribution is sorted by logprob descending, ties by
/// token byte order; zero-probability tokens are omitted.
fn token_from_row(vocab: &[String], row: &[f64], observed: usize) -> Result<TokenScore, ScoreError> {
    let p = row[observed];
    if p <= 0.0 {
        return Err(ScoreError::InvalidInput(format!(
            "observed token {:?} has zero probability in this context",
            vocab[observed]
        )));
    }
    let rank = 1 + row.iter().filter(|q| **q > p).count() as u32;
    let mut dist: Vec<(String, f64)> = vocab
        .iter()
        .zip(row.iter())
        .filter(|(_, q)| **q > 0.0)
        .map(|(tok, q)| (tok.clone(), q.ln()))
        .collect();
    dist.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    Ok(TokenScore {
        token_text: vocab[observed].clone(),
        logprob: p.ln(),
        rank,
        rank_approximate: false,
        top_dist: Some(dist),
    })
}

fn spec_digest(spec: &MockSpec) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(spec).expect("serializable"));
    hex::encode(&hasher.finalize()[..4])
}

fn bucket_of(c: char, vocab_size: usize) -> usize {
    // FNV-1a over the UTF-8 bytes; stable across platforms.
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut buf = [0u8; 4];
    for b in c.encode_utf8(&mut buf).as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (hash % vocab_size as u64) as usize
}

/// Distribution for a context bucket: seeded positive weights, normalized.
fn hashed_row(seed: u64, context_bucket: usize, vocab_size: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (context_bucket as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut row: Vec<f64> = (0..vocab_size).map(|_| rng.random::<f64>() + 0.05).collect();
    let sum: f64 = row.iter().sum();
    for p in &mut row {
        *p /= sum;
    }
    row
}
