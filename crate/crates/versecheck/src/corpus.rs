//! Poem corpus: data model, manifest ingestion, validation, statistics,
//! and train/test splitting.
//!
//! A corpus is described by a newline-delimited manifest (one JSON object
//! per line) with record kinds `poem`, `pair`, and `image`. Poems are
//! stanza-structured; pairs link a human poem to an AI poem with the same
//! title; images are generated from human poems and referenced by path
//! relative to the manifest root.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

/// Who wrote a poem: a human, or a named generator model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Authorship {
    Human,
    Ai { generator_id: String },
}

impl Authorship {
    pub fn is_human(&self) -> bool {
        matches!(self, Authorship::Human)
    }

    pub fn generator_id(&self) -> Option<&str> {
        match self {
            Authorship::Human => None,
            Authorship::Ai { generator_id } => Some(generator_id),
        }
    }
}

fn default_language_hint() -> String {
    "zh".to_string()
}

/// A titled, stanza-structured poem with an authorship label.
///
/// In memory the body is a list of stanzas, each a list of lines. On the
/// wire each stanza is a single string with `\n` line separators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poem {
    pub id: String,
    pub title: String,
    #[serde(with = "stanza_strings")]
    pub body: Vec<Vec<String>>,
    pub authorship: Authorship,
    #[serde(default = "default_language_hint")]
    pub language_hint: String,
}

/// Serialize stanzas as strings with `\n` line separators.
mod stanza_strings {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(body: &[Vec<String>], ser: S) -> Result<S::Ok, S::Error> {
        let stanzas: Vec<String> = body.iter().map(|lines| lines.join("\n")).collect();
        stanzas.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Vec<String>>, D::Error> {
        let stanzas = Vec::<String>::deserialize(de)?;
        Ok(stanzas
            .into_iter()
            .map(|s| s.split('\n').map(str::to_string).collect())
            .collect())
    }
}

impl Poem {
    /// Build a poem from a plain text body where stanzas are separated by
    /// one or more blank lines.
    pub fn from_plain_text(
        id: impl Into<String>,
        title: impl Into<String>,
        body_text: &str,
        authorship: Authorship,
    ) -> Poem {
        let mut stanzas: Vec<Vec<String>> = Vec::new();
        let mut current: Vec<String> = Vec::new();
        for line in body_text.lines() {
            if line.trim().is_empty() {
                if !current.is_empty() {
                    stanzas.push(std::mem::take(&mut current));
                }
            } else {
                current.push(line.to_string());
            }
        }
        if !current.is_empty() {
            stanzas.push(current);
        }
        Poem {
            id: id.into(),
            title: title.into(),
            body: stanzas,
            authorship,
            language_hint: default_language_hint(),
        }
    }

    /// Normalize all text fields to Unicode NFC.
    pub fn normalized(mut self) -> Poem {
        self.title = nfc(&self.title);
        for stanza in &mut self.body {
            for line in stanza.iter_mut() {
                *line = nfc(line);
            }
        }
        self
    }

    /// Check the structural invariants: at least one stanza and one line,
    /// no blank lines, AI poems carry a generator id.
    pub fn validate(&self) -> Result<(), String> {
        if self.body.is_empty() {
            return Err(format!("poem {}: body has no stanzas", self.id));
        }
        for stanza in &self.body {
            if stanza.is_empty() {
                return Err(format!("poem {}: empty stanza", self.id));
            }
            for line in stanza {
                if line.trim().is_empty() {
                    return Err(format!("poem {}: blank line inside a stanza", self.id));
                }
            }
        }
        if let Authorship::Ai { generator_id } = &self.authorship {
            if generator_id.trim().is_empty() {
                return Err(format!("poem {}: AI poem without generator_id", self.id));
            }
        }
        Ok(())
    }

    pub fn stanza_count(&self) -> usize {
        self.body.len()
    }

    pub fn line_count(&self) -> usize {
        self.body.iter().map(Vec::len).sum()
    }

    /// Body text with stanza breaks rendered as blank lines. The title is
    /// not included; detector scoring operates on this form.
    pub fn body_text(&self) -> String {
        self.body
            .iter()
            .map(|stanza| stanza.join("\n"))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    /// Title plus body, the form substituted into generation and judge
    /// prompts (pair members share the title, so it leaks no signal).
    pub fn full_text(&self) -> String {
        format!("{}\n\n{}", self.title, self.body_text())
    }
}

/// A human poem and the AI poem generated from it. The two must share a
/// title, byte-equal after NFC normalization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoemPair {
    pub pair_id: String,
    pub human_id: String,
    pub ai_id: String,
    pub generator_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaType {
    Png,
    Jpeg,
}

impl MediaType {
    /// Leading magic bytes for the format.
    pub fn magic(self) -> &'static [u8] {
        match self {
            MediaType::Png => &[0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A],
            MediaType::Jpeg => &[0xFF, 0xD8, 0xFF],
        }
    }
}

/// An image generated from a human poem, stored relative to the manifest
/// root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageAsset {
    pub image_id: String,
    pub source_human_id: String,
    pub media_path: String,
    pub media_type: MediaType,
    pub generator_model: String,
    pub prompt_digest: String,
}

impl ImageAsset {
    /// Resolve the media path against a corpus root.
    pub fn resolved_path(&self, root: &Path) -> PathBuf {
        root.join(&self.media_path)
    }
}

/// One line of the corpus manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifestRecord {
    Poem(Poem),
    Pair(PoemPair),
    Image(ImageAsset),
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("media error: {0}")]
    Media(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid train fraction {0}; must be strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A validated, immutable corpus. Maps are ordered so iteration (and hence
/// export) is deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    root: PathBuf,
    poems: BTreeMap<String, Poem>,
    pairs: BTreeMap<String, PoemPair>,
    images: BTreeMap<String, ImageAsset>,
}

impl Corpus {
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn poem(&self, id: &str) -> Option<&Poem> {
        self.poems.get(id)
    }

    pub fn pair(&self, id: &str) -> Option<&PoemPair> {
        self.pairs.get(id)
    }

    pub fn image(&self, id: &str) -> Option<&ImageAsset> {
        self.images.get(id)
    }

    /// Image generated from the given human poem, if any.
    pub fn image_for_human_poem(&self, human_id: &str) -> Option<&ImageAsset> {
        self.images.values().find(|i| i.source_human_id == human_id)
    }

    pub fn poems(&self) -> impl Iterator<Item = &Poem> {
        self.poems.values()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &PoemPair> {
        self.pairs.values()
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageAsset> {
        self.images.values()
    }

    pub fn poem_count(&self) -> usize {
        self.poems.len()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }
}

/// Read and validate a corpus from a newline-delimited manifest.
///
/// `root` anchors relative image paths. Every record is schema-checked at
/// its line; cross-record invariants (references, duplicate ids, pair
/// title equality) are checked once all records are read. Image files must
/// exist and start with the magic bytes of their declared media type.
pub fn ingest_corpus(root: &Path, manifest: impl BufRead) -> Result<Corpus, CorpusError> {
    let mut poems: BTreeMap<String, Poem> = BTreeMap::new();
    let mut pairs: BTreeMap<String, PoemPair> = BTreeMap::new();
    let mut images: BTreeMap<String, ImageAsset> = BTreeMap::new();

    for (idx, line) in manifest.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Schema {
                line: line_no,
                message: e.to_string(),
            })?;
        match record {
            ManifestRecord::Poem(poem) => {
                let poem = poem.normalized();
                poem.validate().map_err(|message| CorpusError::Schema {
                    line: line_no,
                    message,
                })?;
                if poems.insert(poem.id.clone(), poem.clone()).is_some() {
                    return Err(CorpusError::Integrity(format!(
                        "duplicate poem id {} (line {line_no})",
                        poem.id
                    )));
                }
            }
            ManifestRecord::Pair(pair) => {
                if pairs.insert(pair.pair_id.clone(), pair.clone()).is_some() {
                    return Err(CorpusError::Integrity(format!(
                        "duplicate pair id {} (line {line_no})",
                        pair.pair_id
                    )));
                }
            }
            ManifestRecord::Image(image) => {
                if images.insert(image.image_id.clone(), image.clone()).is_some() {
                    return Err(CorpusError::Integrity(format!(
                        "duplicate image id {} (line {line_no})",
                        image.image_id
                    )));
                }
            }
        }
    }

    for pair in pairs.values() {
        let human = poems.get(&pair.human_id).ok_or_else(|| {
            CorpusError::Integrity(format!(
                "pair {}: dangling human_id {}",
                pair.pair_id, pair.human_id
            ))
        })?;
        let ai = poems.get(&pair.ai_id).ok_or_else(|| {
            CorpusError::Integrity(format!(
                "pair {}: dangling ai_id {}",
                pair.pair_id, pair.ai_id
            ))
        })?;
        if !human.authorship.is_human() {
            return Err(CorpusError::Integrity(format!(
                "pair {}: human_id {} is not a human poem",
                pair.pair_id, pair.human_id
            )));
        }
        match ai.authorship.generator_id() {
            Some(gen) if gen == pair.generator_id => {}
            Some(gen) => {
                return Err(CorpusError::Integrity(format!(
                    "pair {}: ai poem generator {gen} does not match pair generator {}",
                    pair.pair_id, pair.generator_id
                )));
            }
            None => {
                return Err(CorpusError::Integrity(format!(
                    "pair {}: ai_id {} is not an AI poem",
                    pair.pair_id, pair.ai_id
                )));
            }
        }
        if human.title != ai.title {
            return Err(CorpusError::Integrity(format!(
                "pair {}: title mismatch between {} ({:?}) and {} ({:?})",
                pair.pair_id, pair.human_id, human.title, pair.ai_id, ai.title
            )));
        }
    }

    for image in images.values() {
        match poems.get(&image.source_human_id) {
            Some(p) if p.authorship.is_human() => {}
            Some(_) => {
                return Err(CorpusError::Integrity(format!(
                    "image {}: source poem {} is not human-written",
                    image.image_id, image.source_human_id
                )));
            }
            None => {
                return Err(CorpusError::Integrity(format!(
                    "image {}: dangling source_human_id {}",
                    image.image_id, image.source_human_id
                )));
            }
        }
        let path = image.resolved_path(root);
        let bytes = std::fs::read(&path).map_err(|e| {
            CorpusError::Media(format!(
                "image {}: cannot read {}: {e}",
                image.image_id,
                path.display()
            ))
        })?;
        if !bytes.starts_with(image.media_type.magic()) {
            return Err(CorpusError::Media(format!(
                "image {}: {} does not look like {:?}",
                image.image_id,
                path.display(),
                image.media_type
            )));
        }
    }

    Ok(Corpus {
        root: root.to_path_buf(),
        poems,
        pairs,
        images,
    })
}

/// Write a corpus back out as a manifest. Re-ingesting the output yields an
/// entity-wise identical corpus.
pub fn export_corpus(corpus: &Corpus, mut out: impl Write) -> Result<(), CorpusError> {
    for poem in corpus.poems.values() {
        let rec = ManifestRecord::Poem(poem.clone());
        writeln!(out, "{}", serde_json::to_string(&rec).expect("serializable"))?;
    }
    for pair in corpus.pairs.values() {
        let rec = ManifestRecord::Pair(pair.clone());
        writeln!(out, "{}", serde_json::to_string(&rec).expect("serializable"))?;
    }
    for image in corpus.images.values() {
        let rec = ManifestRecord::Image(image.clone());
        writeln!(out, "{}", serde_json::to_string(&rec).expect("serializable"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// A poem source: human authors collectively, or one generator model.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    Human,
    Generator(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Human => write!(f, "Human"),
            Source::Generator(g) => write!(f, "{g}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub poems: u64,
    pub stanzas: u64,
    pub lines: u64,
    pub words: u64,
}

impl SourceCounts {
    fn add(&mut self, other: SourceCounts) {
        self.poems += other.poems;
        self.stanzas += other.stanzas;
        self.lines += other.lines;
        self.words += other.words;
    }
}

/// Per-source poem/stanza/line/word counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_source: BTreeMap<Source, SourceCounts>,
}

impl CorpusStats {
    pub fn source(&self, source: &Source) -> SourceCounts {
        self.per_source.get(source).copied().unwrap_or_default()
    }

    /// Merge another stats table into this one, per source.
    pub fn merge(&mut self, other: &CorpusStats) {
        for (source, counts) in &other.per_source {
            self.per_source.entry(source.clone()).or_default().add(*counts);
        }
    }
}

/// Count words under the CJK rule: each CJK character is one word; any
/// maximal run of other non-whitespace, non-punctuation characters is one
/// word; punctuation and whitespace never count.
pub fn count_words(text: &str) -> u64 {
    let mut words = 0u64;
    let mut in_run = false;
    for c in text.chars() {
        if is_cjk(c) {
            if in_run {
                words += 1;
                in_run = false;
            }
            words += 1;
        } else if c.is_whitespace() || is_punctuation(c) {
            if in_run {
                words += 1;
                in_run = false;
            }
        } else {
            in_run = true;
        }
    }
    if in_run {
        words += 1;
    }
    words
}

fn is_cjk(c: char) -> bool {
    matches!(u32::from(c),
        0x4E00..=0x9FFF     // CJK Unified Ideographs
        | 0x3400..=0x4DBF   // Extension A
        | 0xF900..=0xFAFF   // Compatibility Ideographs
        | 0x20000..=0x2EBEF // Extensions B..F
    )
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(u32::from(c),
            0x2000..=0x206F     // general punctuation (…, —, curly quotes)
            | 0x3000..=0x303F   // CJK symbols and punctuation (、。「」)
            | 0xFF01..=0xFF0F   // fullwidth ！ through ／
            | 0xFF1A..=0xFF20   // fullwidth ： through ＠
            | 0xFF3B..=0xFF40   // fullwidth ［ through ｀
            | 0xFF5B..=0xFF65   // fullwidth ｛ through halfwidth 。
            | 0x30FB..=0x30FB   // katakana middle dot
        )
}

fn poem_counts(poem: &Poem) -> SourceCounts {
    let words = poem
        .body
        .iter()
        .flat_map(|stanza| stanza.iter())
        .map(|line| count_words(line))
        .sum();
    SourceCounts {
        poems: 1,
        stanzas: poem.stanza_count() as u64,
        lines: poem.line_count() as u64,
        words,
    }
}

/// Per-source statistics over all poems in the corpus. Deterministic and
/// additive: stats of a disjoint union is the per-source sum of stats.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    stats_over(corpus.poems())
}

/// Statistics over any poem collection (used by ingest reports and tests).
pub fn stats_over<'a>(poems: impl Iterator<Item = &'a Poem>) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for poem in poems {
        let source = match &poem.authorship {
            Authorship::Human => Source::Human,
            Authorship::Ai { generator_id } => Source::Generator(generator_id.clone()),
        };
        stats.per_source.entry(source).or_default().add(poem_counts(poem));
    }
    stats
}

// ---------------------------------------------------------------------------
// Train/test split
// ---------------------------------------------------------------------------

/// A disjoint train/test partition of pair ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_pairs: Vec<String>,
    pub test_pairs: Vec<String>,
    pub seed: u64,
}

impl DatasetSplit {
    /// Short identifier binding this split to its inputs, recorded in
    /// calibration metadata.
    pub fn split_id(&self) -> String {
        let mut hasher = Sha256::new();
        for id in self.train_pairs.iter().chain(self.test_pairs.iter()) {
            hasher.update(id.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update(self.seed.to_le_bytes());
        let digest = hasher.finalize();
        hex::encode(&digest[..6])
    }
}

/// Deterministically split pairs into train and test sets.
///
/// Pair ids are sorted, shuffled with a seeded permutation, and the first
/// `round(train_fraction * n)` become the train set. The result depends
/// only on the set of pair ids, the seed, and the fraction.
pub fn split_pairs(
    pairs: &[PoemPair],
    seed: u64,
    train_fraction: f64,
) -> Result<DatasetSplit, CorpusError> {
    if pairs.is_empty() {
        return Err(CorpusError::EmptyInput("no pairs to split"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }
    let mut ids: Vec<String> = pairs.iter().map(|p| p.pair_id.clone()).collect();
    ids.sort();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = (((ids.len() as f64) * train_fraction).round() as usize).min(ids.len());
    let (train, test) = ids.split_at(n_train);
    let mut train: Vec<String> = train.to_vec();
    let mut test: Vec<String> = test.to_vec();
    train.sort();
    test.sort();
    Ok(DatasetSplit {
        train_pairs: train,
        test_pairs: test,
        seed,
    })
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}
