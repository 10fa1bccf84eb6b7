//! Run the whole pipeline on the sample corpus with mock backends:
//! ingest, score, calibrate, detect, judge (all four prompts), evaluate.
//!
//! Usage: cargo run -p versecheck --example full_pipeline

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use versecheck::commands::{self, BackendSet, Overrides};
use versecheck::config::{JudgeConfig, Roles, RunConfig, SplitConfig};
use versecheck::genkit::MockImageBackend;
use versecheck::judge::backend::MockChatBackend;
use versecheck::judge::{PromptKind, PromptLanguage};
use versecheck::scorebackend::mock::{make_mock_backend, MockSpec};
use versecheck::statdetect::Detector;

fn main() -> anyhow::Result<()> {
    let work = std::env::temp_dir().join("versecheck-example-pipeline");
    let _ = std::fs::remove_dir_all(&work);
    let config = RunConfig {
        corpus_root: Path::new(env!("CARGO_MANIFEST_DIR")).join("sample_corpus"),
        cache_dir: work.join("cache"),
        output_dir: work.join("out"),
        split: SplitConfig { seed: 7, train_fraction: 0.5 },
        detectors: Detector::all().to_vec(),
        judge: JudgeConfig {
            kind: PromptKind::Ip3,
            example_pair_id: None,
            parallelism: 2,
            language: PromptLanguage::English,
        },
        backends: BTreeMap::new(),
        roles: Roles::default(),
    };

    let backends = BackendSet {
        scoring: Some(Arc::new(make_mock_backend(MockSpec::Hashed { vocab_size: 24, seed: 11 })?)),
        observer: Some(Arc::new(make_mock_backend(MockSpec::Hashed { vocab_size: 24, seed: 21 })?)),
        performer: Some(Arc::new(make_mock_backend(MockSpec::Hashed { vocab_size: 24, seed: 22 })?)),
        chat: Some(Arc::new(MockChatBackend::keyed(vec![
            "Answer: AI".into(),
            "Answer: Human".into(),
            "Answer: AI".into(),
        ]))),
        image: Some(Arc::new(MockImageBackend::tiny_png())),
    };
    let overrides = Overrides::default();

    let report = commands::cmd_ingest(&config)?;
    println!("[1/6] ingest: {} poems, {} pairs", report.poems, report.pairs);

    let summary = commands::cmd_score(&config, &backends, &overrides)?;
    println!("[2/6] score: {} poems x {} models cached", summary.poems, summary.models.len());

    let thresholds = commands::cmd_calibrate(&config, &backends, &overrides)?;
    println!("[3/6] calibrate: {} thresholds", thresholds.len());

    let rows = commands::cmd_detect(&config, &backends, &overrides)?;
    println!("[4/6] detect: {} report rows", rows.len());

    for kind in PromptKind::all() {
        let o = Overrides { prompt: Some(kind), ..Overrides::default() };
        let summary = commands::cmd_judge(&config, &backends, &o)?;
        println!("[5/6] judge {kind}: {} poems, {} unparseable", summary.judged, summary.unparseable);
    }

    let rendered = commands::cmd_evaluate(&config, &overrides)?;
    println!("[6/6] evaluate:\n\n{rendered}");
    println!("artifacts under {}", config.output_dir.display());
    Ok(())
}
