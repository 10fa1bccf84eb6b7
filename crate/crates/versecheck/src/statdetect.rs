//! The five statistical zero-shot detectors over token-level scores, plus
//! threshold calibration and classification.
//!
//! Every detector is a pure, position-symmetric function of a
//! [`SequenceScore`]. Scores carry an orientation (which side of the
//! boundary means AI) and an explicit degenerate marker instead of NaN;
//! degenerate scores are classified as human by default.

use serde::{Deserialize, Serialize};

use crate::eval::{macro_f1, Label};
use crate::scorebackend::SequenceScore;

/// Small denominator floor for the log-likelihood log-rank ratio.
const LRR_EPSILON: f64 = 1e-6;
/// Variance floor below which curvature is degenerate.
const CURVATURE_MIN_VARIANCE: f64 = 1e-12;
/// Cross-perplexity floor below which the perplexity ratio is degenerate.
const BINOCULARS_MIN_DENOM: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detector {
    LogLikelihood,
    LogRank,
    Lrr,
    FastDetectGpt,
    Binoculars,
}

impl Detector {
    pub fn all() -> [Detector; 5] {
        [
            Detector::LogLikelihood,
            Detector::LogRank,
            Detector::Lrr,
            Detector::FastDetectGpt,
            Detector::Binoculars,
        ]
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Detector::LogLikelihood | Detector::Lrr | Detector::FastDetectGpt => {
                Orientation::HigherMeansAi
            }
            Detector::LogRank | Detector::Binoculars => Orientation::LowerMeansAi,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Detector::LogLikelihood => "log-likelihood",
            Detector::LogRank => "log-rank",
            Detector::Lrr => "lrr",
            Detector::FastDetectGpt => "fast-detect-gpt",
            Detector::Binoculars => "binoculars",
        }
    }
}

impl std::fmt::Display for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Detector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "log-likelihood" | "loglikelihood" | "ll" => Ok(Detector::LogLikelihood),
            "log-rank" | "logrank" => Ok(Detector::LogRank),
            "lrr" => Ok(Detector::Lrr),
            "fast-detect-gpt" | "fastdetectgpt" | "fast-detectgpt" => Ok(Detector::FastDetectGpt),
            "binoculars" => Ok(Detector::Binoculars),
            other => Err(format!("unknown detector {other:?}")),
        }
    }
}

/// Which side of a boundary is classified as AI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherMeansAi,
    LowerMeansAi,
}

/// A raw detector output for one poem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorScore {
    #[serde(default)]
    pub poem_id: String,
    pub detector: Detector,
    pub value: f64,
    pub orientation: Orientation,
    /// Explicit marker for zero-variance / zero-denominator cases; the
    /// value is still finite (a documented fallback), never NaN.
    #[serde(default)]
    pub degenerate: bool,
    /// True when any contributing rank was floored by top-k truncation.
    #[serde(default)]
    pub approximate_ranks: bool,
}

impl DetectorScore {
    fn new(detector: Detector, value: f64) -> DetectorScore {
        debug_assert!(value.is_finite());
        DetectorScore {
            poem_id: String::new(),
            detector,
            value,
            orientation: detector.orientation(),
            degenerate: false,
            approximate_ranks: false,
        }
    }

    fn degenerate(mut self) -> DetectorScore {
        self.degenerate = true;
        self
    }

    pub fn with_poem_id(mut self, id: impl Into<String>) -> DetectorScore {
        self.poem_id = id.into();
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error("empty sequence: {0}")]
    EmptySequence(&'static str),
    #[error("missing distribution: {0}")]
    MissingDistribution(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("calibration input contains a single class")]
    SingleClass,
    #[error("detector mismatch: expected {expected}, got {got}")]
    DetectorMismatch { expected: Detector, got: Detector },
    #[error("calibration input is empty")]
    EmptyInput,
}

/// Mean per-token log-probability. Higher means AI.
pub fn log_likelihood(seq: &SequenceScore) -> Result<DetectorScore, DetectError> {
    if seq.tokens.is_empty() {
        return Err(DetectError::EmptySequence("log-likelihood"));
    }
    let n = seq.tokens.len() as f64;
    let mean = seq.tokens.iter().map(|t| t.logprob).sum::<f64>() / n;
    Ok(DetectorScore::new(Detector::LogLikelihood, mean))
}

/// Mean natural log of the 1-based observed-token rank. Lower means AI.
pub fn log_rank(seq: &SequenceScore) -> Result<DetectorScore, DetectError> {
    if seq.tokens.is_empty() {
        return Err(DetectError::EmptySequence("log-rank"));
    }
    let n = seq.tokens.len() as f64;
    let mean = seq
        .tokens
        .iter()
        .map(|t| f64::from(t.rank).ln())
        .sum::<f64>()
        / n;
    let mut score = DetectorScore::new(Detector::LogRank, mean);
    score.approximate_ranks = seq.has_approximate_ranks();
    Ok(score)
}

/// Log-likelihood log-rank ratio: |mean log-likelihood| / mean log-rank,
/// with the denominator floored at 1e-6. Higher means AI. A floored
/// denominator yields the degenerate marker.
pub fn lrr(seq: &SequenceScore) -> Result<DetectorScore, DetectError> {
    let ll = log_likelihood(seq)?;
    let lr = log_rank(seq)?;
    let value = ll.value.abs() / lr.value.max(LRR_EPSILON);
    let mut score = DetectorScore::new(Detector::Lrr, value);
    score.approximate_ranks = lr.approximate_ranks;
    if lr.value < LRR_EPSILON {
        score = score.degenerate();
    }
    Ok(score)
}

/// Conditional probability curvature: the text's summed log-probability,
/// standardized by the analytic mean and variance of sampled-token
/// log-probability under each position's own next-token distribution.
/// Higher means AI. Near-zero variance yields the degenerate marker with
/// value 0.
///
/// Distributions truncated to top-k bias the expectations low; full-vocab
/// scores are exact.
pub fn fast_detect_gpt(seq: &SequenceScore) -> Result<DetectorScore, DetectError> {
    if seq.tokens.is_empty() {
        return Err(DetectError::EmptySequence("fast-detect-gpt"));
    }
    let observed_sum: f64 = seq.tokens.iter().map(|t| t.logprob).sum();
    let (mu, var) = curvature_moments(seq)?;
    if var < CURVATURE_MIN_VARIANCE {
        return Ok(DetectorScore::new(Detector::FastDetectGpt, 0.0).degenerate());
    }
    let value = (observed_sum - mu) / var.sqrt();
    Ok(DetectorScore::new(Detector::FastDetectGpt, value))
}

/// The analytic mean and variance of a text's summed log-probability when
/// each position's token is drawn from that position's own next-token
/// distribution. These standardize the curvature score.
pub fn curvature_moments(seq: &SequenceScore) -> Result<(f64, f64), DetectError> {
    let mut mu = 0.0;
    let mut var = 0.0;
    for (i, t) in seq.tokens.iter().enumerate() {
        let dist = t.top_dist.as_ref().ok_or_else(|| {
            DetectError::MissingDistribution(format!("position {i} has no next-token distribution"))
        })?;
        let (m, v) = logprob_moments(dist);
        mu += m;
        var += v;
    }
    Ok((mu, var))
}

/// Mean and variance of ln p(v) for v drawn from the distribution itself.
fn logprob_moments(dist: &[(String, f64)]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (_, lp) in dist {
        let p = lp.exp();
        mean += p * lp;
        second += p * lp * lp;
    }
    (mean, (second - mean * mean).max(0.0))
}

/// Perplexity ratio: observer log-perplexity of the text divided by the
/// observer-performer cross log-perplexity. Lower means AI. A denominator
/// under 1e-9 yields the degenerate marker.
///
/// Both sequences must score the same tokenization of the same text. When
/// distributions are truncated, performer tokens absent from the
/// observer's listing fall back to the observer's smallest listed
/// log-probability.
pub fn binoculars(
    observer: &SequenceScore,
    performer: &SequenceScore,
) -> Result<DetectorScore, DetectError> {
    if observer.tokens.is_empty() {
        return Err(DetectError::EmptySequence("binoculars"));
    }
    if observer.tokens.len() != performer.tokens.len() {
        return Err(DetectError::Alignment(format!(
            "observer scored {} tokens, performer {}",
            observer.tokens.len(),
            performer.tokens.len()
        )));
    }
    if observer.full_vocab != performer.full_vocab {
        return Err(DetectError::Alignment(
            "observer and performer disagree on vocabulary coverage".into(),
        ));
    }
    let n = observer.tokens.len() as f64;
    let mut log_ppl = 0.0;
    let mut cross = 0.0;
    for (i, (obs, perf)) in observer.tokens.iter().zip(performer.tokens.iter()).enumerate() {
        if obs.token_text != perf.token_text {
            return Err(DetectError::Alignment(format!(
                "token {i} differs: observer {:?}, performer {:?}",
                obs.token_text, perf.token_text
            )));
        }
        log_ppl -= obs.logprob;
        let obs_dist = obs.top_dist.as_ref().ok_or_else(|| {
            DetectError::MissingDistribution(format!("observer position {i} has no distribution"))
        })?;
        let perf_dist = perf.top_dist.as_ref().ok_or_else(|| {
            DetectError::MissingDistribution(format!("performer position {i} has no distribution"))
        })?;
        let floor = obs_dist
            .iter()
            .map(|(_, lp)| *lp)
            .fold(f64::INFINITY, f64::min);
        for (tok, q_lp) in perf_dist {
            let q = q_lp.exp();
            let p_lp = obs_dist
                .iter()
                .find(|(t, _)| t == tok)
                .map(|(_, lp)| *lp)
                .unwrap_or(floor);
            cross -= q * p_lp;
        }
    }
    let numerator = log_ppl / n;
    let denominator = cross / n;
    let value = numerator / denominator.max(BINOCULARS_MIN_DENOM);
    let mut score = DetectorScore::new(Detector::Binoculars, value);
    if denominator < BINOCULARS_MIN_DENOM {
        score = score.degenerate();
    }
    Ok(score)
}

// ---------------------------------------------------------------------------
// Calibration and classification
// ---------------------------------------------------------------------------

/// Provenance recorded with a calibrated threshold.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    pub seed: u64,
    pub split_id: String,
    pub n_train: usize,
}

/// A calibrated decision boundary for one detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub detector: Detector,
    /// May be infinite (classify-everything-one-way); JSON carries
    /// infinities as the strings "inf" / "-inf".
    #[serde(with = "boundary_repr")]
    pub boundary: f64,
    pub orientation: Orientation,
    /// Macro-F1 achieved on the calibration scores.
    pub train_metric: f64,
    pub calibration_meta: CalibrationMeta,
}

mod boundary_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Named(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Finite(*v).serialize(ser)
        } else if *v > 0.0 {
            Repr::Named("inf".to_string()).serialize(ser)
        } else {
            Repr::Named("-inf".to_string()).serialize(ser)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        match Repr::deserialize(de)? {
            Repr::Finite(v) => Ok(v),
            Repr::Named(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!(
                    "unrecognized boundary {other:?}"
                ))),
            },
        }
    }
}

impl Threshold {
    pub fn with_meta(mut self, meta: CalibrationMeta) -> Threshold {
        self.calibration_meta = meta;
        self
    }
}

/// Predict a label for a raw value under a boundary and orientation. A
/// value exactly on the boundary is classified AI.
fn side_of(value: f64, boundary: f64, orientation: Orientation) -> Label {
    let is_ai = match orientation {
        Orientation::HigherMeansAi => value >= boundary,
        Orientation::LowerMeansAi => value <= boundary,
    };
    if is_ai {
        Label::Ai
    } else {
        Label::Human
    }
}

/// How degenerate scores are classified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneratePolicy {
    /// Conservative default: fewer false AI accusations.
    #[default]
    AsHuman,
    AsAi,
    /// Ignore the marker and apply the boundary to the fallback value.
    UseBoundary,
}

fn predict(score: &DetectorScore, boundary: f64, policy: DegeneratePolicy) -> Label {
    if score.degenerate {
        match policy {
            DegeneratePolicy::AsHuman => return Label::Human,
            DegeneratePolicy::AsAi => return Label::Ai,
            DegeneratePolicy::UseBoundary => {}
        }
    }
    side_of(score.value, boundary, score.orientation)
}

/// Choose the boundary that maximizes Macro-F1 on the given scores.
///
/// Candidates are the midpoints between consecutive distinct score values
/// plus the two infinities. Ties on Macro-F1 are broken by the widest gap
/// between adjacent values (infinite candidates count as infinitely wide),
/// then by the smaller boundary. Degenerate scores are classified under
/// the default policy regardless of the boundary.
pub fn calibrate_threshold(
    scores: &[(DetectorScore, Label)],
) -> Result<Threshold, DetectError> {
    let Some((first, _)) = scores.first() else {
        return Err(DetectError::EmptyInput);
    };
    let detector = first.detector;
    for (s, _) in scores {
        if s.detector != detector {
            return Err(DetectError::DetectorMismatch {
                expected: detector,
                got: s.detector,
            });
        }
    }
    let has_ai = scores.iter().any(|(_, l)| *l == Label::Ai);
    let has_human = scores.iter().any(|(_, l)| *l == Label::Human);
    if !(has_ai && has_human) {
        return Err(DetectError::SingleClass);
    }

    let mut values: Vec<f64> = scores
        .iter()
        .filter(|(s, _)| !s.degenerate)
        .map(|(s, _)| s.value)
        .collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();

    // (boundary, gap width)
    let mut candidates: Vec<(f64, f64)> =
        vec![(f64::NEG_INFINITY, f64::INFINITY), (f64::INFINITY, f64::INFINITY)];
    for pair in values.windows(2) {
        candidates.push(((pair[0] + pair[1]) / 2.0, pair[1] - pair[0]));
    }

    let policy = DegeneratePolicy::default();
    let mut best: Option<(f64, f64, f64)> = None; // (metric, gap, boundary)
    for (boundary, gap) in candidates {
        let outcomes: Vec<(Label, Label)> = scores
            .iter()
            .map(|(s, gold)| (*gold, predict(s, boundary, policy)))
            .collect();
        let metric = macro_f1(&outcomes);
        let better = match best {
            None => true,
            Some((m, g, b)) => {
                metric > m + 1e-12
                    || ((metric - m).abs() <= 1e-12
                        && (gap > g || (gap == g && boundary < b)))
            }
        };
        if better {
            best = Some((metric, gap, boundary));
        }
    }
    let (train_metric, _, boundary) = best.expect("at least the infinite candidates exist");
    Ok(Threshold {
        detector,
        boundary,
        orientation: detector.orientation(),
        train_metric,
        calibration_meta: CalibrationMeta {
            n_train: scores.len(),
            ..CalibrationMeta::default()
        },
    })
}

/// Classify a score under a calibrated threshold, applying the default
/// degenerate policy (degenerate scores are called human).
pub fn classify(score: &DetectorScore, threshold: &Threshold) -> Result<Label, DetectError> {
    classify_with(score, threshold, DegeneratePolicy::default())
}

pub fn classify_with(
    score: &DetectorScore,
    threshold: &Threshold,
    policy: DegeneratePolicy,
) -> Result<Label, DetectError> {
    if score.detector != threshold.detector {
        return Err(DetectError::DetectorMismatch {
            expected: threshold.detector,
            got: score.detector,
        });
    }
    Ok(predict(score, threshold.boundary, policy))
}
