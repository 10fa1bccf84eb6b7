//! Score a text with a hand-specified mock model and print the per-token
//! log-probabilities, ranks, and next-token distributions.
//!
//! Usage: cargo run -p versecheck --example score_with_mock

use std::collections::BTreeMap;
use std::sync::Arc;

use versecheck::scorebackend::mock::{make_mock_backend, MockSpec};
use versecheck::scorebackend::Scorer;

fn main() -> anyhow::Result<()> {
    // P(next = 'b' | 'a') = 0.8; everything else near-uniform.
    let mut after = BTreeMap::new();
    after.insert("a".to_string(), vec![0.2, 0.8]);
    let spec = MockSpec::Table {
        vocab: vec!["a".into(), "b".into()],
        any: vec![0.5, 0.5],
        after,
    };
    let backend = Arc::new(make_mock_backend(spec)?);

    let cache = std::env::temp_dir().join("versecheck-example-score-cache");
    let scorer = Scorer::new(backend.clone()).with_cache(&cache);

    let text = "abba";
    let seq = scorer.score_sequence(text)?;
    println!("model {} scored {text:?}: {} conditional positions\n", seq.model_id, seq.tokens.len());
    for (i, t) in seq.tokens.iter().enumerate() {
        println!(
            "position {}: token {:?}  logprob {:+.6}  rank {}",
            i + 2,
            t.token_text,
            t.logprob,
            t.rank
        );
        if let Some(dist) = &t.top_dist {
            for (tok, lp) in dist {
                println!("    alternative {tok:?} -> p = {:.4}", lp.exp());
            }
        }
    }

    // Second call is served from the cache without touching the backend.
    let before = backend.call_count();
    let again = scorer.score_sequence(text)?;
    assert_eq!(seq, again);
    println!("\ncache hit: backend call count still {}", before);
    Ok(())
}
