//! Config-driven commands behind the `versecheck` binary: ingest, score,
//! calibrate, detect, judge, gen-poems, gen-images, evaluate.
//!
//! Every command is idempotent given unchanged inputs (all remote calls go
//! through on-disk caches), writes only under the configured output and
//! cache directories, copies the resolved config into the output
//! directory, and stamps outputs with the config digest.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::config::{BackendEntry, RunConfig};
use crate::corpus::{
    self, corpus_stats, ingest_corpus, split_pairs, Corpus, CorpusStats, DatasetSplit,
    ManifestRecord, Poem, PoemPair,
};
use crate::eval::{evaluate_run, render_report, Label, ReportFormat, ReportRow};
use crate::genkit::{
    self, GenError, GenParams, HttpImageBackend, ImageBackend, MockImageBackend,
};
use crate::judge::backend::{ChatBackend, HttpChatBackend, MockChatBackend};
use crate::judge::batch::{run_judge_batch, BatchOptions, VerdictLogRecord};
use crate::judge::{build_prompt, plan_requests, JudgeError, PromptKind};
use crate::scorebackend::http::HttpScoreBackend;
use crate::scorebackend::mock::MockScoreBackend;
use crate::scorebackend::{ScoreBackend, ScoreError, Scorer};
use crate::statdetect::{
    self, calibrate_threshold, classify, CalibrationMeta, Detector, DetectorScore, Threshold,
};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("partial batch: {failed} of {total} items failed")]
    PartialBatch { failed: usize, total: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CommandError {
    /// Process exit code: 1 config/validation, 2 backend failure,
    /// 3 partial batch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_)
            | CommandError::Validation(_)
            | CommandError::MissingArtifact(_)
            | CommandError::Io(_) => 1,
            CommandError::Backend(_) => 2,
            CommandError::PartialBatch { .. } => 3,
        }
    }
}

impl From<crate::config::ConfigError> for CommandError {
    fn from(e: crate::config::ConfigError) -> Self {
        CommandError::Config(e.to_string())
    }
}

impl From<corpus::CorpusError> for CommandError {
    fn from(e: corpus::CorpusError) -> Self {
        CommandError::Validation(e.to_string())
    }
}

impl From<ScoreError> for CommandError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::InvalidInput(m) | ScoreError::InvalidDistribution(m) => {
                CommandError::Validation(m)
            }
            other => CommandError::Backend(other.to_string()),
        }
    }
}

impl From<JudgeError> for CommandError {
    fn from(e: JudgeError) -> Self {
        CommandError::Backend(e.to_string())
    }
}

impl From<GenError> for CommandError {
    fn from(e: GenError) -> Self {
        CommandError::Backend(e.to_string())
    }
}

impl From<statdetect::DetectError> for CommandError {
    fn from(e: statdetect::DetectError) -> Self {
        CommandError::Validation(e.to_string())
    }
}

impl From<crate::eval::EvalError> for CommandError {
    fn from(e: crate::eval::EvalError) -> Self {
        CommandError::Validation(e.to_string())
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub detectors: Option<Vec<Detector>>,
    pub prompt: Option<PromptKind>,
    pub generator: Option<String>,
    pub dry_run: bool,
    pub format: Option<ReportFormat>,
}

/// Concrete backends resolved from the config's role bindings. Tests may
/// construct one directly with instrumented mocks.
#[derive(Default)]
pub struct BackendSet {
    pub scoring: Option<Arc<dyn ScoreBackend>>,
    pub observer: Option<Arc<dyn ScoreBackend>>,
    pub performer: Option<Arc<dyn ScoreBackend>>,
    pub chat: Option<Arc<dyn ChatBackend>>,
    pub image: Option<Arc<dyn ImageBackend>>,
}

impl BackendSet {
    pub fn from_config(config: &RunConfig) -> Result<BackendSet, CommandError> {
        let scoring_backend = |name: &str| -> Result<Arc<dyn ScoreBackend>, CommandError> {
            match config.backends.get(name) {
                Some(BackendEntry::ScoringHttp(cfg)) => {
                    Ok(Arc::new(HttpScoreBackend::new(cfg.clone())?))
                }
                Some(BackendEntry::ScoringMock { spec }) => {
                    // Keep the spec digest from the default id so edited
                    // specs never share cache entries with old runs.
                    let backend = MockScoreBackend::new(spec.clone())?;
                    let id = format!("mock:{name}:{}", backend.model_id());
                    Ok(Arc::new(backend.with_model_id(id)))
                }
                _ => Err(CommandError::Config(format!(
                    "backend {name:?} is not a scoring backend"
                ))),
            }
        };
        let chat_backend = |name: &str| -> Result<Arc<dyn ChatBackend>, CommandError> {
            match config.backends.get(name) {
                Some(BackendEntry::ChatHttp(cfg)) => Ok(Arc::new(
                    HttpChatBackend::new(cfg.clone()).map_err(|e| CommandError::Backend(e.to_string()))?,
                )),
                Some(BackendEntry::ChatMock { responses }) => {
                    let mut hasher = sha2::Sha256::new();
                    use sha2::Digest;
                    for r in responses {
                        hasher.update(r.as_bytes());
                        hasher.update([0u8]);
                    }
                    let digest = hex::encode(&hasher.finalize()[..4]);
                    Ok(Arc::new(
                        MockChatBackend::keyed(responses.clone())
                            .with_model_id(format!("mock:{name}:{digest}")),
                    ))
                }
                _ => Err(CommandError::Config(format!(
                    "backend {name:?} is not a chat backend"
                ))),
            }
        };
        let image_backend = |name: &str| -> Result<Arc<dyn ImageBackend>, CommandError> {
            match config.backends.get(name) {
                Some(BackendEntry::ImageHttp(cfg)) => Ok(Arc::new(
                    HttpImageBackend::new(cfg.clone()).map_err(|e| CommandError::Backend(e.to_string()))?,
                )),
                Some(BackendEntry::ImageMock) => Ok(Arc::new(MockImageBackend::tiny_png())),
                _ => Err(CommandError::Config(format!(
                    "backend {name:?} is not an image backend"
                ))),
            }
        };
        let mut set = BackendSet::default();
        if let Some(name) = &config.roles.scoring {
            set.scoring = Some(scoring_backend(name)?);
        }
        if let Some(name) = &config.roles.observer {
            set.observer = Some(scoring_backend(name)?);
        }
        if let Some(name) = &config.roles.performer {
            set.performer = Some(scoring_backend(name)?);
        }
        if let Some(name) = &config.roles.chat {
            set.chat = Some(chat_backend(name)?);
        }
        if let Some(name) = &config.roles.image {
            set.image = Some(image_backend(name)?);
        }
        Ok(set)
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn prepare_run(config: &RunConfig) -> Result<(), CommandError> {
    std::fs::create_dir_all(&config.output_dir)?;
    std::fs::create_dir_all(&config.cache_dir)?;
    std::fs::write(
        config.output_dir.join("run-config.toml"),
        config.to_toml(),
    )?;
    Ok(())
}

fn load_corpus(config: &RunConfig) -> Result<Corpus, CommandError> {
    let path = config.manifest_path();
    let file = std::fs::File::open(&path).map_err(|e| {
        CommandError::Validation(format!("cannot open manifest {}: {e}", path.display()))
    })?;
    Ok(ingest_corpus(&config.corpus_root, std::io::BufReader::new(file))?)
}

/// Pairs grouped by generator, optionally filtered.
fn pairs_by_generator(
    corpus: &Corpus,
    generator_filter: Option<&str>,
) -> BTreeMap<String, Vec<PoemPair>> {
    let mut map: BTreeMap<String, Vec<PoemPair>> = BTreeMap::new();
    for pair in corpus.pairs() {
        if generator_filter.is_some_and(|g| g != pair.generator_id) {
            continue;
        }
        map.entry(pair.generator_id.clone()).or_default().push(pair.clone());
    }
    map
}

/// Each generator's pairs are split independently with the shared seed,
/// mirroring the per-generator evaluation tables.
fn split_for(config: &RunConfig, pairs: &[PoemPair]) -> Result<DatasetSplit, CommandError> {
    Ok(split_pairs(pairs, config.split.seed, config.split.train_fraction)?)
}

struct ScorerSet {
    scoring: Option<Scorer>,
    observer: Option<Scorer>,
    performer: Option<Scorer>,
}

impl ScorerSet {
    fn build(config: &RunConfig, backends: &BackendSet) -> ScorerSet {
        let cache = config.cache_dir.join("scores");
        let wrap = |b: &Option<Arc<dyn ScoreBackend>>| {
            b.as_ref()
                .map(|b| Scorer::new(b.clone()).with_cache(&cache))
        };
        ScorerSet {
            scoring: wrap(&backends.scoring),
            observer: wrap(&backends.observer),
            performer: wrap(&backends.performer),
        }
    }

    fn scoring(&self) -> Result<&Scorer, CommandError> {
        self.scoring.as_ref().ok_or_else(|| {
            CommandError::Config("no backend bound to the scoring role".into())
        })
    }

    fn pair_for_binoculars(&self) -> Result<(&Scorer, &Scorer), CommandError> {
        match (&self.observer, &self.performer) {
            (Some(o), Some(p)) => Ok((o, p)),
            _ => Err(CommandError::Config(
                "the perplexity-ratio detector needs observer and performer roles bound".into(),
            )),
        }
    }
}

fn detector_score(
    detector: Detector,
    poem: &Poem,
    scorers: &ScorerSet,
) -> Result<DetectorScore, CommandError> {
    let text = poem.body_text();
    let score = match detector {
        Detector::LogLikelihood => {
            statdetect::log_likelihood(&scorers.scoring()?.score_sequence(&text)?)?
        }
        Detector::LogRank => statdetect::log_rank(&scorers.scoring()?.score_sequence(&text)?)?,
        Detector::Lrr => statdetect::lrr(&scorers.scoring()?.score_sequence(&text)?)?,
        Detector::FastDetectGpt => {
            statdetect::fast_detect_gpt(&scorers.scoring()?.score_sequence(&text)?)?
        }
        Detector::Binoculars => {
            let (observer, performer) = scorers.pair_for_binoculars()?;
            statdetect::binoculars(
                &observer.score_sequence(&text)?,
                &performer.score_sequence(&text)?,
            )?
        }
    };
    Ok(score.with_poem_id(&poem.id))
}

fn effective_detectors(config: &RunConfig, overrides: &Overrides) -> Vec<Detector> {
    let mut detectors = overrides
        .detectors
        .clone()
        .unwrap_or_else(|| config.detectors.clone());
    let mut seen = BTreeSet::new();
    detectors.retain(|d| seen.insert(*d));
    detectors
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CommandError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("serializable"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn gold_label(poem: &Poem) -> Label {
    if poem.authorship.is_human() {
        Label::Human
    } else {
        Label::Ai
    }
}

/// Poems of a pair in (human, ai) order.
fn pair_poems<'c>(corpus: &'c Corpus, pair: &PoemPair) -> Result<(&'c Poem, &'c Poem), CommandError> {
    let human = corpus
        .poem(&pair.human_id)
        .ok_or_else(|| CommandError::Validation(format!("missing poem {}", pair.human_id)))?;
    let ai = corpus
        .poem(&pair.ai_id)
        .ok_or_else(|| CommandError::Validation(format!("missing poem {}", pair.ai_id)))?;
    Ok((human, ai))
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IngestReport {
    pub config_digest: String,
    pub poems: usize,
    pub pairs: usize,
    pub images: usize,
    pub stats: CorpusStats,
}

impl IngestReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "config: {}\npoems: {}\npairs: {}\nimages: {}\n\nsource        poems  stanzas  lines  words\n",
            self.config_digest, self.poems, self.pairs, self.images
        );
        for (source, counts) in &self.stats.per_source {
            out.push_str(&format!(
                "{:<12}  {:>5}  {:>7}  {:>5}  {:>5}\n",
                source.to_string(),
                counts.poems,
                counts.stanzas,
                counts.lines,
                counts.words
            ));
        }
        out
    }
}

/// Validate the corpus and report its statistics.
pub fn cmd_ingest(config: &RunConfig) -> Result<IngestReport, CommandError> {
    prepare_run(config)?;
    let corpus = load_corpus(config)?;
    let report = IngestReport {
        config_digest: config.digest(),
        poems: corpus.poem_count(),
        pairs: corpus.pair_count(),
        images: corpus.images().count(),
        stats: corpus_stats(&corpus),
    };
    std::fs::write(config.output_dir.join("ingest-report.txt"), report.render())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ScoreSummary {
    pub config_digest: String,
    pub poems: usize,
    pub models: Vec<String>,
}

/// Populate the sequence-score cache for every poem referenced by a pair,
/// under every scoring role the configured detectors need.
pub fn cmd_score(
    config: &RunConfig,
    backends: &BackendSet,
    overrides: &Overrides,
) -> Result<ScoreSummary, CommandError> {
    prepare_run(config)?;
    let corpus = load_corpus(config)?;
    let detectors = effective_detectors(config, overrides);
    let scorers = ScorerSet::build(config, backends);

    let mut needed: Vec<&Scorer> = Vec::new();
    if detectors.iter().any(|d| *d != Detector::Binoculars) {
        needed.push(scorers.scoring()?);
    }
    if detectors.contains(&Detector::Binoculars) {
        let (o, p) = scorers.pair_for_binoculars()?;
        needed.push(o);
        needed.push(p);
    }

    let by_generator = pairs_by_generator(&corpus, overrides.generator.as_deref());
    let mut poem_ids: BTreeSet<&str> = BTreeSet::new();
    for pair in by_generator.values().flatten() {
        poem_ids.insert(pair.human_id.as_str());
        poem_ids.insert(pair.ai_id.as_str());
    }

    for id in &poem_ids {
        let poem = corpus
            .poem(id)
            .ok_or_else(|| CommandError::Validation(format!("missing poem {id}")))?;
        for scorer in &needed {
            scorer.score_sequence(&poem.body_text())?;
        }
    }
    Ok(ScoreSummary {
        config_digest: config.digest(),
        poems: poem_ids.len(),
        models: needed.iter().map(|s| s.model_id().to_string()).collect(),
    })
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

/// One line of a per-detector threshold file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub generator: String,
    pub config_digest: String,
    pub threshold: Threshold,
}

fn threshold_path(config: &RunConfig, detector: Detector) -> PathBuf {
    config
        .output_dir
        .join("thresholds")
        .join(format!("{detector}.jsonl"))
}

/// Calibrate per-generator thresholds on each generator's train split.
pub fn cmd_calibrate(
    config: &RunConfig,
    backends: &BackendSet,
    overrides: &Overrides,
) -> Result<Vec<ThresholdRecord>, CommandError> {
    prepare_run(config)?;
    let corpus = load_corpus(config)?;
    let detectors = effective_detectors(config, overrides);
    let scorers = ScorerSet::build(config, backends);
    let by_generator = pairs_by_generator(&corpus, overrides.generator.as_deref());
    if by_generator.is_empty() {
        return Err(CommandError::Validation("corpus has no pairs to calibrate on".into()));
    }

    let mut all_records = Vec::new();
    for detector in detectors {
        let mut records = Vec::new();
        for (generator, pairs) in &by_generator {
            let split = split_for(config, pairs)?;
            let mut scored: Vec<(DetectorScore, Label)> = Vec::new();
            for pair_id in &split.train_pairs {
                let pair = corpus.pair(pair_id).expect("split over corpus pairs");
                let (human, ai) = pair_poems(&corpus, pair)?;
                for poem in [human, ai] {
                    scored.push((detector_score(detector, poem, &scorers)?, gold_label(poem)));
                }
            }
            let threshold = calibrate_threshold(&scored)?.with_meta(CalibrationMeta {
                seed: config.split.seed,
                split_id: format!("{generator}:{}", split.split_id()),
                n_train: scored.len(),
            });
            records.push(ThresholdRecord {
                generator: generator.clone(),
                config_digest: config.digest(),
                threshold,
            });
        }
        write_jsonl(&threshold_path(config, detector), &records)?;
        all_records.extend(records);
    }
    Ok(all_records)
}

fn load_thresholds(
    config: &RunConfig,
    detector: Detector,
) -> Result<BTreeMap<String, Threshold>, CommandError> {
    let path = threshold_path(config, detector);
    let content = std::fs::read_to_string(&path).map_err(|_| {
        CommandError::MissingArtifact(format!(
            "no thresholds for {detector} at {} (run calibrate first)",
            path.display()
        ))
    })?;
    let mut map = BTreeMap::new();
    for line in content.lines().filter(|l| !l.trim().is_empty()) {
        let record: ThresholdRecord = serde_json::from_str(line)
            .map_err(|e| CommandError::Validation(format!("bad threshold record: {e}")))?;
        map.insert(record.generator, record.threshold);
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub poem_id: String,
    pub generator: String,
    pub detector: Detector,
    pub value: f64,
    pub degenerate: bool,
    pub predicted: Label,
    pub gold: Label,
    pub config_digest: String,
}

/// Classify the test split with every calibrated detector and write
/// report rows.
pub fn cmd_detect(
    config: &RunConfig,
    backends: &BackendSet,
    overrides: &Overrides,
) -> Result<Vec<ReportRow>, CommandError> {
    prepare_run(config)?;
    let corpus = load_corpus(config)?;
    let detectors = effective_detectors(config, overrides);
    let scorers = ScorerSet::build(config, backends);
    let by_generator = pairs_by_generator(&corpus, overrides.generator.as_deref());

    let mut rows = Vec::new();
    let mut classifications = Vec::new();
    for detector in detectors {
        let thresholds = load_thresholds(config, detector)?;
        for (generator, pairs) in &by_generator {
            let threshold = thresholds.get(generator).ok_or_else(|| {
                CommandError::MissingArtifact(format!(
                    "no threshold for {detector} on generator {generator} (run calibrate first)"
                ))
            })?;
            let split = split_for(config, pairs)?;
            let mut predictions: Vec<(String, Label)> = Vec::new();
            let mut gold: BTreeMap<String, Label> = BTreeMap::new();
            for pair_id in &split.test_pairs {
                let pair = corpus.pair(pair_id).expect("split over corpus pairs");
                let (human, ai) = pair_poems(&corpus, pair)?;
                for poem in [human, ai] {
                    let score = detector_score(detector, poem, &scorers)?;
                    let predicted = classify(&score, threshold)?;
                    predictions.push((poem.id.clone(), predicted));
                    gold.insert(poem.id.clone(), gold_label(poem));
                    classifications.push(ClassificationRecord {
                        poem_id: poem.id.clone(),
                        generator: generator.clone(),
                        detector,
                        value: score.value,
                        degenerate: score.degenerate,
                        predicted,
                        gold: gold_label(poem),
                        config_digest: config.digest(),
                    });
                }
            }
            rows.push(evaluate_run(detector.name(), generator, &predictions, &gold)?);
        }
    }

    write_jsonl(&config.output_dir.join("classifications.jsonl"), &classifications)?;
    write_jsonl(&config.output_dir.join("rows").join("detect.jsonl"), &rows)?;
    let format = overrides.format.unwrap_or(ReportFormat::Text);
    let report = stamped_report(&rows, format, &config.digest());
    std::fs::write(
        config.output_dir.join(format!("detect-report.{}", format_ext(format))),
        report,
    )?;
    Ok(rows)
}

fn format_ext(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Text => "txt",
        ReportFormat::Csv => "csv",
        ReportFormat::Markdown => "md",
    }
}

fn stamped_report(rows: &[ReportRow], format: ReportFormat, digest: &str) -> String {
    let body = render_report(rows, format);
    match format {
        ReportFormat::Text | ReportFormat::Csv => format!("# config: {digest}\n{body}"),
        ReportFormat::Markdown => format!("<!-- config: {digest} -->\n{body}"),
    }
}

// ---------------------------------------------------------------------------
// judge
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct JudgeSummary {
    pub config_digest: String,
    pub kind: PromptKind,
    pub judged: usize,
    pub failed: usize,
    pub unparseable: usize,
    pub example_pair_id: Option<String>,
    pub rows: Vec<ReportRow>,
}

/// Default example pair: the lexicographically smallest train pair id
/// across generators.
fn default_example_pair(config: &RunConfig, corpus: &Corpus) -> Result<String, CommandError> {
    let mut smallest: Option<String> = None;
    for (_, pairs) in pairs_by_generator(corpus, None) {
        let split = split_for(config, &pairs)?;
        if let Some(first) = split.train_pairs.first() {
            if smallest.as_ref().is_none_or(|s| first < s) {
                smallest = Some(first.clone());
            }
        }
    }
    smallest.ok_or_else(|| CommandError::Validation("corpus has no pairs".into()))
}

/// Judge the test split with the configured prompt kind.
pub fn cmd_judge(
    config: &RunConfig,
    backends: &BackendSet,
    overrides: &Overrides,
) -> Result<JudgeSummary, CommandError> {
    prepare_run(config)?;
    let corpus = load_corpus(config)?;
    let kind = overrides.prompt.unwrap_or(config.judge.kind);
    let by_generator = pairs_by_generator(&corpus, overrides.generator.as_deref());
    if by_generator.is_empty() {
        return Err(CommandError::Validation("corpus has no pairs to judge".into()));
    }

    let example_pair_id = if kind.needs_example() {
        Some(match &config.judge.example_pair_id {
            Some(id) => id.clone(),
            None => default_example_pair(config, &corpus)?,
        })
    } else {
        None
    };

    let mut target_pair_ids: Vec<String> = Vec::new();
    for (_, pairs) in &by_generator {
        let split = split_for(config, pairs)?;
        target_pair_ids.extend(split.test_pairs);
    }

    let planned = plan_requests(
        &corpus,
        kind,
        config.judge.language,
        example_pair_id.as_deref().unwrap_or(""),
        &target_pair_ids,
    )
    .map_err(|e| match e {
        JudgeError::InvalidRequest(m) => CommandError::Validation(m),
        other => CommandError::from(other),
    })?;

    if overrides.dry_run {
        let dir = config.output_dir.join(format!("prompts-{kind}"));
        std::fs::create_dir_all(&dir)?;
        for p in &planned {
            let messages = build_prompt(&p.request, corpus.root())?;
            std::fs::write(
                dir.join(format!("{}.txt", p.poem_id)),
                messages.render_transcript(),
            )?;
        }
        return Ok(JudgeSummary {
            config_digest: config.digest(),
            kind,
            judged: 0,
            failed: 0,
            unparseable: 0,
            example_pair_id,
            rows: Vec::new(),
        });
    }

    let chat = backends
        .chat
        .as_ref()
        .ok_or_else(|| CommandError::Config("no backend bound to the chat role".into()))?;

    let requests: Vec<_> = planned.iter().map(|p| p.request.clone()).collect();
    let opts = BatchOptions::new(corpus.root())
        .with_cache_dir(config.cache_dir.join("verdicts"))
        .with_checkpoint(
            config
                .cache_dir
                .join(format!("judge-checkpoint-{}-{kind}.jsonl", chat.model_id())),
        )
        .with_parallelism(config.judge.parallelism);
    let outcomes = run_judge_batch(&requests, chat.as_ref(), &opts);

    // Verdict log (append-only) and per-generator predictions. Failed
    // items score as misclassifications, like unparseable verdicts.
    let log_path = config.output_dir.join(format!("verdicts-{kind}.jsonl"));
    let mut log_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)?;
    let mut by_gen_predictions: BTreeMap<String, Vec<(String, Label)>> = BTreeMap::new();
    let mut by_gen_gold: BTreeMap<String, BTreeMap<String, Label>> = BTreeMap::new();
    let mut failed = 0usize;
    let mut unparseable = 0usize;
    for (p, outcome) in planned.iter().zip(outcomes.iter()) {
        let predicted = match outcome {
            Ok(verdict) => {
                if verdict.parsed == crate::judge::VerdictLabel::Unparseable {
                    unparseable += 1;
                }
                let record = VerdictLogRecord::new(verdict, kind, &p.poem_id, Some(p.gold));
                writeln!(log_file, "{}", serde_json::to_string(&record).expect("serializable"))?;
                verdict.parsed.to_prediction(p.gold)
            }
            Err(_) => {
                failed += 1;
                p.gold.opposite()
            }
        };
        by_gen_predictions
            .entry(p.generator_id.clone())
            .or_default()
            .push((p.poem_id.clone(), predicted));
        by_gen_gold
            .entry(p.generator_id.clone())
            .or_default()
            .insert(p.poem_id.clone(), p.gold);
    }

    let detector_name = format!("{}:{kind}", chat.model_id());
    let mut rows = Vec::new();
    for (generator, predictions) in &by_gen_predictions {
        rows.push(evaluate_run(
            &detector_name,
            generator,
            predictions,
            &by_gen_gold[generator],
        )?);
    }

    write_jsonl(
        &config.output_dir.join("rows").join(format!("judge-{kind}.jsonl")),
        &rows,
    )?;
    let format = overrides.format.unwrap_or(ReportFormat::Text);
    std::fs::write(
        config
            .output_dir
            .join(format!("judge-report-{kind}.{}", format_ext(format))),
        stamped_report(&rows, format, &config.digest()),
    )?;

    let summary = JudgeSummary {
        config_digest: config.digest(),
        kind,
        judged: outcomes.len(),
        failed,
        unparseable,
        example_pair_id,
        rows,
    };
    if failed > 0 {
        return Err(CommandError::PartialBatch {
            failed,
            total: outcomes.len(),
        });
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// gen-poems / gen-images
// ---------------------------------------------------------------------------

/// Bounded worker pool preserving input order; fatal errors abort the
/// remaining items.
fn run_pool<T: Sync, R: Send>(
    items: &[T],
    parallelism: usize,
    is_fatal: impl Fn(&R) -> bool + Sync,
    aborted: impl Fn() -> R + Sync,
    worker: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..parallelism.max(1).min(items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let out = if abort.load(Ordering::SeqCst) {
                    aborted()
                } else {
                    worker(&items[i])
                };
                if is_fatal(&out) {
                    abort.store(true, Ordering::SeqCst);
                }
                *slots[i].lock().expect("slot") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot").expect("filled"))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GenSummary {
    pub config_digest: String,
    pub generated: usize,
    pub reused: usize,
    pub failed: usize,
    pub manifest: PathBuf,
}

/// Generate one AI counterpart per human poem with the chat backend and
/// write a corpus-extension manifest (poem and pair records).
pub fn cmd_gen_poems(
    config: &RunConfig,
    backends: &BackendSet,
    overrides: &Overrides,
) -> Result<GenSummary, CommandError> {
    prepare_run(config)?;
    let corpus = load_corpus(config)?;
    let humans: Vec<&Poem> = corpus.poems().filter(|p| p.authorship.is_human()).collect();
    if humans.is_empty() {
        return Err(CommandError::Validation("corpus has no human poems".into()));
    }

    if overrides.dry_run {
        let dir = config.output_dir.join("prompts-gen-poems");
        std::fs::create_dir_all(&dir)?;
        for human in &humans {
            std::fs::write(
                dir.join(format!("{}.txt", human.id)),
                genkit::build_poem_prompt(human)?,
            )?;
        }
        return Ok(GenSummary {
            config_digest: config.digest(),
            generated: 0,
            reused: 0,
            failed: 0,
            manifest: dir,
        });
    }

    let chat = backends
        .chat
        .as_ref()
        .ok_or_else(|| CommandError::Config("no backend bound to the chat role".into()))?;
    let model = chat.model_id().to_string();
    let params = GenParams::for_model(&model);
    let item_cache = config.cache_dir.join("gen-poems").join(sanitize(&model));
    std::fs::create_dir_all(&item_cache)?;

    enum Outcome {
        Fresh(genkit::GeneratedPoem),
        Reused(genkit::GeneratedPoem),
        Failed(GenError),
        Aborted,
    }
    let results = run_pool(
        &humans,
        config.judge.parallelism,
        |r: &Outcome| matches!(r, Outcome::Failed(e) if e.is_fatal()),
        || Outcome::Aborted,
        |human| {
            let cache_path = item_cache.join(format!("{}.json", human.id));
            if let Ok(bytes) = std::fs::read(&cache_path) {
                if let Ok(done) = serde_json::from_slice::<genkit::GeneratedPoem>(&bytes) {
                    return Outcome::Reused(done);
                }
            }
            let ai_id = format!("{}-{}", sanitize(&model), human.id);
            match genkit::generate_poem(human, &params, chat.as_ref(), &ai_id) {
                Ok(done) => {
                    let _ = std::fs::write(
                        &cache_path,
                        serde_json::to_vec(&done).expect("serializable"),
                    );
                    Outcome::Fresh(done)
                }
                Err(e) => Outcome::Failed(e),
            }
        },
    );

    let mut records: Vec<ManifestRecord> = Vec::new();
    let (mut generated, mut reused, mut failed) = (0usize, 0usize, 0usize);
    for (human, outcome) in humans.iter().zip(results) {
        let done = match outcome {
            Outcome::Fresh(d) => {
                generated += 1;
                d
            }
            Outcome::Reused(d) => {
                reused += 1;
                d
            }
            Outcome::Failed(_) | Outcome::Aborted => {
                failed += 1;
                continue;
            }
        };
        let pair = PoemPair {
            pair_id: format!("pair-{}-{}", sanitize(&model), human.id),
            human_id: human.id.clone(),
            ai_id: done.poem.id.clone(),
            generator_id: model.clone(),
        };
        records.push(ManifestRecord::Poem(done.poem));
        records.push(ManifestRecord::Pair(pair));
    }
    let manifest = config
        .output_dir
        .join("generated")
        .join(format!("poems-{}.jsonl", sanitize(&model)));
    write_jsonl(&manifest, &records)?;

    if failed > 0 {
        return Err(CommandError::PartialBatch {
            failed,
            total: humans.len(),
        });
    }
    Ok(GenSummary {
        config_digest: config.digest(),
        generated,
        reused,
        failed,
        manifest,
    })
}

/// Generate one image per human poem and write image records alongside
/// the stored media.
pub fn cmd_gen_images(
    config: &RunConfig,
    backends: &BackendSet,
    overrides: &Overrides,
) -> Result<GenSummary, CommandError> {
    prepare_run(config)?;
    let corpus = load_corpus(config)?;
    let humans: Vec<&Poem> = corpus.poems().filter(|p| p.authorship.is_human()).collect();
    if humans.is_empty() {
        return Err(CommandError::Validation("corpus has no human poems".into()));
    }

    if overrides.dry_run {
        let dir = config.output_dir.join("prompts-gen-images");
        std::fs::create_dir_all(&dir)?;
        for human in &humans {
            std::fs::write(
                dir.join(format!("{}.txt", human.id)),
                genkit::build_image_prompt(human)?,
            )?;
        }
        return Ok(GenSummary {
            config_digest: config.digest(),
            generated: 0,
            reused: 0,
            failed: 0,
            manifest: dir,
        });
    }

    let image_backend = backends
        .image
        .as_ref()
        .ok_or_else(|| CommandError::Config("no backend bound to the image role".into()))?;
    let media_dir = config.output_dir.join("generated");
    std::fs::create_dir_all(media_dir.join("images"))?;

    enum Outcome {
        Done(crate::corpus::ImageAsset, bool),
        Failed(GenError),
        Aborted,
    }
    let results = run_pool(
        &humans,
        config.judge.parallelism,
        |r: &Outcome| matches!(r, Outcome::Failed(e) if e.is_fatal()),
        || Outcome::Aborted,
        |human| {
            let meta = media_dir
                .join("images")
                .join(format!("img-{}.meta.json", human.id));
            let existed = meta.exists();
            match genkit::request_image(human, image_backend.as_ref(), &media_dir) {
                Ok(asset) => Outcome::Done(asset, existed),
                Err(e) => Outcome::Failed(e),
            }
        },
    );

    let mut records: Vec<ManifestRecord> = Vec::new();
    let (mut generated, mut reused, mut failed) = (0usize, 0usize, 0usize);
    for outcome in results {
        match outcome {
            Outcome::Done(asset, existed) => {
                if existed {
                    reused += 1;
                } else {
                    generated += 1;
                }
                records.push(ManifestRecord::Image(asset));
            }
            Outcome::Failed(_) | Outcome::Aborted => failed += 1,
        }
    }
    let manifest = media_dir.join("images.jsonl");
    write_jsonl(&manifest, &records)?;

    if failed > 0 {
        return Err(CommandError::PartialBatch {
            failed,
            total: humans.len(),
        });
    }
    Ok(GenSummary {
        config_digest: config.digest(),
        generated,
        reused,
        failed,
        manifest,
    })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct RunSummaryRecord {
    pub row: ReportRow,
    pub source: String,
    pub config_digest: String,
}

/// Combine all row files into rendered reports (all three formats) plus a
/// machine-readable run summary linking each row to its source artifact.
pub fn cmd_evaluate(config: &RunConfig, overrides: &Overrides) -> Result<String, CommandError> {
    prepare_run(config)?;
    let rows_dir = config.output_dir.join("rows");
    let mut row_files: Vec<PathBuf> = match std::fs::read_dir(&rows_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect(),
        Err(_) => Vec::new(),
    };
    row_files.sort();
    if row_files.is_empty() {
        return Err(CommandError::MissingArtifact(format!(
            "no report rows under {} (run detect or judge first)",
            rows_dir.display()
        )));
    }

    let mut rows: Vec<ReportRow> = Vec::new();
    let mut summary: Vec<RunSummaryRecord> = Vec::new();
    for file in &row_files {
        let content = std::fs::read_to_string(file)?;
        for line in content.lines().filter(|l| !l.trim().is_empty()) {
            let row: ReportRow = serde_json::from_str(line)
                .map_err(|e| CommandError::Validation(format!("bad row in {}: {e}", file.display())))?;
            summary.push(RunSummaryRecord {
                row: row.clone(),
                source: file
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                config_digest: config.digest(),
            });
            rows.push(row);
        }
    }

    let digest = config.digest();
    for format in [ReportFormat::Text, ReportFormat::Csv, ReportFormat::Markdown] {
        std::fs::write(
            config.output_dir.join(format!("report.{}", format_ext(format))),
            stamped_report(&rows, format, &digest),
        )?;
    }
    write_jsonl(&config.output_dir.join("run-summary.jsonl"), &summary)?;

    let format = overrides.format.unwrap_or(ReportFormat::Text);
    Ok(stamped_report(&rows, format, &digest))
}
