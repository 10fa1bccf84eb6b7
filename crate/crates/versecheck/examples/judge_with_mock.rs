//! Judge the sample corpus test pairs with a scripted mock chat backend,
//! then score the verdicts into per-generator F1 rows.
//!
//! Usage: cargo run -p versecheck --example judge_with_mock

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::Path;

use versecheck::eval::{evaluate_run, render_report, Label, ReportFormat};
use versecheck::judge::backend::MockChatBackend;
use versecheck::judge::batch::{run_judge_batch, BatchOptions};
use versecheck::judge::{plan_requests, PromptKind, PromptLanguage};

fn main() -> anyhow::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("sample_corpus");
    let manifest = std::fs::File::open(root.join("manifest.jsonl"))?;
    let corpus = versecheck::corpus::ingest_corpus(&root, BufReader::new(manifest))?;

    let targets: Vec<String> = corpus
        .pairs()
        .map(|p| p.pair_id.clone())
        .filter(|id| id != "p-001")
        .collect();
    let planned = plan_requests(
        &corpus,
        PromptKind::Ip3,
        PromptLanguage::English,
        "p-001",
        &targets,
    )?;
    let requests: Vec<_> = planned.iter().map(|p| p.request.clone()).collect();
    println!("judging {} poems with IP3 under a mock judge", requests.len());

    let backend = MockChatBackend::keyed(vec![
        "Answer: AI".into(),
        "Answer: Human".into(),
        "Answer: AI".into(),
    ]);
    let work = std::env::temp_dir().join("versecheck-example-judge");
    let opts = BatchOptions::new(corpus.root())
        .with_cache_dir(work.join("verdicts"))
        .with_checkpoint(work.join("checkpoint.jsonl"))
        .with_parallelism(3);
    let verdicts = run_judge_batch(&requests, &backend, &opts);
    println!(
        "backend calls: {} (max {} in flight)\n",
        backend.call_count(),
        backend.max_concurrency()
    );

    let mut predictions: BTreeMap<String, Vec<(String, Label)>> = BTreeMap::new();
    let mut gold: BTreeMap<String, BTreeMap<String, Label>> = BTreeMap::new();
    for (p, outcome) in planned.iter().zip(&verdicts) {
        let verdict = outcome.as_ref().expect("mock never fails");
        predictions
            .entry(p.generator_id.clone())
            .or_default()
            .push((p.poem_id.clone(), verdict.parsed.to_prediction(p.gold)));
        gold.entry(p.generator_id.clone())
            .or_default()
            .insert(p.poem_id.clone(), p.gold);
    }
    let mut rows = Vec::new();
    for (generator, preds) in &predictions {
        rows.push(evaluate_run("mock:IP3", generator, preds, &gold[generator])?);
    }
    print!("{}", render_report(&rows, ReportFormat::Text));
    Ok(())
}
