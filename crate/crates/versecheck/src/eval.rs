//! Evaluation: confusion matrices, F1_AI / F1_Human / Macro-F1, and report
//! rendering in the benchmark's table layout.
//!
//! Metrics are computed in full precision as fractions in [0, 1] and
//! rendered as percentages, rounded half-to-even to two decimals only at
//! render time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Gold or predicted authorship class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Ai,
    Human,
}

impl Label {
    pub fn opposite(self) -> Label {
        match self {
            Label::Ai => Label::Human,
            Label::Human => Label::Ai,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Ai => write!(f, "AI"),
            Label::Human => write!(f, "Human"),
        }
    }
}

/// Counts with respect to a declared positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    /// Tally (gold, predicted) pairs with `positive` as the positive class.
    pub fn tally<'a>(
        outcomes: impl IntoIterator<Item = &'a (Label, Label)>,
        positive: Label,
    ) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::default();
        for (gold, pred) in outcomes {
            match (*gold == positive, *pred == positive) {
                (true, true) => cm.tp += 1,
                (false, true) => cm.fp += 1,
                (true, false) => cm.fn_ += 1,
                (false, false) => cm.tn += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// F1 = 2tp / (2tp + fp + fn); zero when the denominator is zero.
pub fn f1_from_counts(cm: ConfusionMatrix) -> f64 {
    let denom = 2 * cm.tp + cm.fp + cm.fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * cm.tp as f64 / denom as f64
    }
}

/// Macro-F1 over (gold, predicted) pairs: the mean of F1 with AI positive
/// and F1 with Human positive.
pub fn macro_f1(outcomes: &[(Label, Label)]) -> f64 {
    let f1_ai = f1_from_counts(ConfusionMatrix::tally(outcomes, Label::Ai));
    let f1_human = f1_from_counts(ConfusionMatrix::tally(outcomes, Label::Human));
    (f1_ai + f1_human) / 2.0
}

/// One detector x generator result row. F1 values are fractions in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub detector: String,
    pub generator: String,
    pub f1_ai: f64,
    pub f1_human: f64,
    pub macro_f1: f64,
    pub n: u64,
}

impl ReportRow {
    pub fn new(
        detector: impl Into<String>,
        generator: impl Into<String>,
        f1_ai: f64,
        f1_human: f64,
        n: u64,
    ) -> ReportRow {
        ReportRow {
            detector: detector.into(),
            generator: generator.into(),
            f1_ai,
            f1_human,
            macro_f1: (f1_ai + f1_human) / 2.0,
            n,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no gold label for poem {0}")]
    MissingGold(String),
    #[error("gold labels contain a single class; both AI and Human are required")]
    SingleClassGold,
}

/// Score a prediction run against gold labels for one generator.
///
/// Every prediction must have a gold label and both classes must be
/// present in the gold set. Unparseable judge verdicts are expected to
/// have been mapped to wrong-class predictions upstream.
pub fn evaluate_run(
    detector: &str,
    generator: &str,
    predictions: &[(String, Label)],
    gold: &BTreeMap<String, Label>,
) -> Result<ReportRow, EvalError> {
    let mut outcomes = Vec::with_capacity(predictions.len());
    for (poem_id, pred) in predictions {
        let g = gold
            .get(poem_id)
            .ok_or_else(|| EvalError::MissingGold(poem_id.clone()))?;
        outcomes.push((*g, *pred));
    }
    let golds: Vec<Label> = outcomes.iter().map(|(g, _)| *g).collect();
    if !(golds.contains(&Label::Ai) && golds.contains(&Label::Human)) {
        return Err(EvalError::SingleClassGold);
    }
    let f1_ai = f1_from_counts(ConfusionMatrix::tally(&outcomes, Label::Ai));
    let f1_human = f1_from_counts(ConfusionMatrix::tally(&outcomes, Label::Human));
    Ok(ReportRow::new(
        detector,
        generator,
        f1_ai,
        f1_human,
        outcomes.len() as u64,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// Column-aligned plain text.
    Text,
    /// Comma-separated values.
    Csv,
    /// Markdown table.
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Round half-to-even at two decimals.
pub fn round2_half_even(x: f64) -> f64 {
    let scaled = x * 100.0;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let rounded = if (frac - 0.5).abs() < 1e-9 {
        if (floor as i64).rem_euclid(2) == 0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    rounded / 100.0
}

fn percent(x: f64) -> String {
    format!("{:.2}", round2_half_even(x * 100.0))
}

/// Generator display order in the benchmark tables; unknown generators
/// sort after the known four, alphabetically.
fn generator_order_key(name: &str) -> (u8, String) {
    const ORDER: [&str; 4] = ["gpt-4.1", "glm-4", "deepseek-v3.1", "deepseek-r1"];
    let lower = name.to_ascii_lowercase();
    match ORDER.iter().position(|g| *g == lower) {
        Some(i) => (i as u8, String::new()),
        None => (ORDER.len() as u8, lower),
    }
}

/// The generator-average row for one detector: unweighted mean of each F1
/// column across generators.
pub fn average_row(detector: &str, rows: &[ReportRow]) -> Option<ReportRow> {
    if rows.is_empty() {
        return None;
    }
    let k = rows.len() as f64;
    let f1_ai = rows.iter().map(|r| r.f1_ai).sum::<f64>() / k;
    let f1_human = rows.iter().map(|r| r.f1_human).sum::<f64>() / k;
    let macro_f1 = rows.iter().map(|r| r.macro_f1).sum::<f64>() / k;
    Some(ReportRow {
        detector: detector.to_string(),
        generator: "Avg.".to_string(),
        f1_ai,
        f1_human,
        macro_f1,
        n: rows.iter().map(|r| r.n).sum(),
    })
}

/// Render rows grouped by detector, generators in benchmark order, with an
/// unweighted average row per detector.
pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> String {
    let mut by_detector: BTreeMap<&str, Vec<&ReportRow>> = BTreeMap::new();
    for row in rows {
        by_detector.entry(&row.detector).or_default().push(row);
    }

    let mut ordered: Vec<ReportRow> = Vec::new();
    for (detector, group) in &mut by_detector {
        group.sort_by_key(|r| generator_order_key(&r.generator));
        ordered.extend(group.iter().map(|r| (*r).clone()));
        let owned: Vec<ReportRow> = group.iter().map(|r| (*r).clone()).collect();
        if let Some(avg) = average_row(detector, &owned) {
            ordered.push(avg);
        }
    }

    let header = ["detector", "generator", "F1_AI", "F1_Human", "Macro-F1", "n"];
    match format {
        ReportFormat::Csv => {
            let mut out = String::from("detector,generator,f1_ai,f1_human,macro_f1,n\n");
            for r in &ordered {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.detector,
                    r.generator,
                    percent(r.f1_ai),
                    percent(r.f1_human),
                    percent(r.macro_f1),
                    r.n
                ));
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| Detector | Generator | F1_AI | F1_Human | Macro-F1 | n |\n");
            out.push_str("|---|---|---:|---:|---:|---:|\n");
            for r in &ordered {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} |\n",
                    r.detector,
                    r.generator,
                    percent(r.f1_ai),
                    percent(r.f1_human),
                    percent(r.macro_f1),
                    r.n
                ));
            }
            out
        }
        ReportFormat::Text => {
            let mut table: Vec<[String; 6]> =
                vec![header.map(str::to_string)];
            for r in &ordered {
                table.push([
                    r.detector.clone(),
                    r.generator.clone(),
                    percent(r.f1_ai),
                    percent(r.f1_human),
                    percent(r.macro_f1),
                    r.n.to_string(),
                ]);
            }
            let mut widths = [0usize; 6];
            for row in &table {
                for (i, cell) in row.iter().enumerate() {
                    widths[i] = widths[i].max(cell.chars().count());
                }
            }
            let mut out = String::new();
            for row in &table {
                let line: Vec<String> = row
                    .iter()
                    .enumerate()
                    .map(|(i, cell)| format!("{:w$}", cell, w = widths[i]))
                    .collect();
                out.push_str(line.join("  ").trim_end());
                out.push('\n');
            }
            out
        }
    }
}
