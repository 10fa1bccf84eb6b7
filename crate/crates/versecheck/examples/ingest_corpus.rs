//! Load and validate the bundled sample corpus, then print its
//! per-source statistics.
//!
//! Usage: cargo run -p versecheck --example ingest_corpus

use std::io::BufReader;
use std::path::Path;

use versecheck::corpus::{corpus_stats, ingest_corpus};

fn main() -> anyhow::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("sample_corpus");
    let manifest = std::fs::File::open(root.join("manifest.jsonl"))?;
    let corpus = ingest_corpus(&root, BufReader::new(manifest))?;

    println!(
        "corpus ok: {} poems, {} pairs, {} images\n",
        corpus.poem_count(),
        corpus.pair_count(),
        corpus.images().count()
    );

    println!("{:<14} {:>5} {:>8} {:>6} {:>6}", "source", "poems", "stanzas", "lines", "words");
    let stats = corpus_stats(&corpus);
    for (source, counts) in &stats.per_source {
        println!(
            "{:<14} {:>5} {:>8} {:>6} {:>6}",
            source.to_string(),
            counts.poems,
            counts.stanzas,
            counts.lines,
            counts.words
        );
    }

    let pair = corpus.pairs().next().expect("sample corpus has pairs");
    let human = corpus.poem(&pair.human_id).unwrap();
    println!("\nfirst pair {} — human poem {:?}:\n", pair.pair_id, human.title);
    println!("{}", human.body_text());
    Ok(())
}
