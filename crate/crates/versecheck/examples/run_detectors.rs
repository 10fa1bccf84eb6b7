//! Compute all five statistical detector scores on mock-model output,
//! including the worked closed-form cases.
//!
//! Usage: cargo run -p versecheck --example run_detectors

use versecheck::scorebackend::mock::{make_mock_backend, MockSpec};
use versecheck::scorebackend::ScoreBackend;
use versecheck::statdetect::{binoculars, fast_detect_gpt, log_likelihood, log_rank, lrr};

fn main() -> anyhow::Result<()> {
    let skew = make_mock_backend(MockSpec::table(
        vec!["a".into(), "b".into()],
        vec![0.8, 0.2],
    ))?;
    let even = make_mock_backend(MockSpec::table(
        vec!["a".into(), "b".into()],
        vec![0.5, 0.5],
    ))?;

    let seq = skew.fetch("aab")?;
    println!("text \"aab\" under the (0.8, 0.2) mock:");
    println!("  log-likelihood   {:+.6}  (expect (ln .8 + ln .2)/2 = -0.916291)", log_likelihood(&seq)?.value);
    println!("  log-rank         {:+.6}", log_rank(&seq)?.value);
    let r = lrr(&seq)?;
    println!("  lrr              {:+.6}  degenerate: {}", r.value, r.degenerate);

    let one = skew.fetch("ba")?;
    let c = fast_detect_gpt(&one)?;
    println!("\nsingle position, dist (0.8, 0.2), observed p=0.8:");
    println!("  fast-detect-gpt  {:+.6}  (analytic value is exactly 0.5)", c.value);

    let obs = skew.fetch("aa")?;
    let perf = even.fetch("aa")?;
    let b = binoculars(&obs, &perf)?;
    println!("\nobserver (0.8, 0.2) vs performer (0.5, 0.5) on \"aa\":");
    println!("  binoculars       {:+.6}  (expect -ln .8 / 0.916291 = 0.243534)", b.value);

    // Degenerate inputs carry an explicit marker instead of NaN.
    let uniform = make_mock_backend(MockSpec::uniform(4))?;
    let d = fast_detect_gpt(&uniform.fetch("abcd")?)?;
    println!("\nuniform model curvature: value {:+.3}, degenerate: {}", d.value, d.degenerate);
    Ok(())
}
