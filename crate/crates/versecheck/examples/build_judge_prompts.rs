//! Build all four judge prompts (TP1, TP2, IP2, IP3) for one poem of the
//! sample corpus and print the rendered transcripts.
//!
//! Usage: cargo run -p versecheck --example build_judge_prompts

use std::io::BufReader;
use std::path::Path;

use versecheck::judge::{build_prompt, plan_requests, PromptKind, PromptLanguage};

fn main() -> anyhow::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("sample_corpus");
    let manifest = std::fs::File::open(root.join("manifest.jsonl"))?;
    let corpus = versecheck::corpus::ingest_corpus(&root, BufReader::new(manifest))?;

    // Fixed example pair p-001; judge the poems of pair p-002.
    for kind in PromptKind::all() {
        let planned = plan_requests(
            &corpus,
            kind,
            PromptLanguage::English,
            "p-001",
            &["p-002".to_string()],
        )?;
        let first = &planned[0];
        let messages = build_prompt(&first.request, corpus.root())?;
        println!("================ {kind} (target {}, gold {}) ================", first.poem_id, first.gold);
        println!("{}", messages.render_transcript());
        println!("attachments: {}\n", messages.attachments().len());
    }
    Ok(())
}
