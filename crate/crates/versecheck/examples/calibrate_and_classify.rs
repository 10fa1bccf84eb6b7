//! Calibrate a decision boundary on labelled detector scores and apply it.
//!
//! Usage: cargo run -p versecheck --example calibrate_and_classify

use versecheck::eval::Label;
use versecheck::statdetect::{
    calibrate_threshold, classify, Detector, DetectorScore, Orientation,
};

fn score(value: f64) -> DetectorScore {
    DetectorScore {
        poem_id: String::new(),
        detector: Detector::LogLikelihood,
        value,
        orientation: Orientation::HigherMeansAi,
        degenerate: false,
        approximate_ranks: false,
    }
}

fn main() -> anyhow::Result<()> {
    // Train scores: AI poems sit higher than human poems, with overlap.
    let train: Vec<(DetectorScore, Label)> = vec![
        (score(-1.10), Label::Human),
        (score(-0.95), Label::Human),
        (score(-0.90), Label::Ai),
        (score(-0.80), Label::Human),
        (score(-0.72), Label::Ai),
        (score(-0.60), Label::Ai),
        (score(-0.55), Label::Ai),
    ];
    let threshold = calibrate_threshold(&train)?;
    println!(
        "calibrated {}: boundary {:+.4}, train Macro-F1 {:.4} over {} scores",
        threshold.detector,
        threshold.boundary,
        threshold.train_metric,
        threshold.calibration_meta.n_train
    );

    for value in [-1.0, -0.85, -0.70, -0.50] {
        let label = classify(&score(value), &threshold)?;
        println!("  value {value:+.2} -> {label}");
    }
    Ok(())
}
