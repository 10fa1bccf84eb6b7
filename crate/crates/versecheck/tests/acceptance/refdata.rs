//! Published reference results on the modern-Chinese-poetry detection
//! benchmark, transcribed as printed (percent, two decimals). Used as
//! arithmetic fixtures: each row's Macro-F1 must equal the mean of its
//! F1_AI and F1_Human up to print rounding, and each average must equal
//! the unweighted mean over the four generators.

pub const GENERATORS: [&str; 4] = ["gpt-4.1", "glm-4", "deepseek-v3.1", "deepseek-r1"];

#[derive(Clone, Copy, Debug)]
pub struct RefRow {
    pub f1_ai: f64,
    pub f1_human: f64,
    pub macro_f1: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RefTable {
    pub detector: &'static str,
    /// One row per generator, in [`GENERATORS`] order.
    pub rows: [RefRow; 4],
    /// Printed average row, when the source table has one.
    pub avg_row: Option<RefRow>,
    /// Printed average Macro-F1 from the summary tables, when available.
    pub avg_macro: Option<f64>,
}

const fn row(f1_ai: f64, f1_human: f64, macro_f1: f64) -> RefRow {
    RefRow {
        f1_ai,
        f1_human,
        macro_f1,
    }
}

pub const ROBERTA: RefTable = RefTable {
    detector: "roberta",
    rows: [
        row(90.21, 88.68, 89.44),
        row(74.55, 72.08, 73.31),
        row(80.41, 76.48, 78.44),
        row(96.67, 96.83, 96.74),
    ],
    avg_row: Some(row(85.46, 83.52, 84.48)),
    avg_macro: Some(84.48),
};

pub const FAST_DETECT_GPT: RefTable = RefTable {
    detector: "fast-detect-gpt",
    rows: [
        row(0.00, 66.66, 33.33),
        row(53.40, 50.52, 51.96),
        row(59.56, 65.90, 62.73),
        row(0.00, 66.56, 33.28),
    ],
    avg_row: Some(row(28.24, 62.41, 45.33)),
    avg_macro: Some(45.33),
};

pub const LRR: RefTable = RefTable {
    detector: "lrr",
    rows: [
        row(66.67, 0.99, 33.83),
        row(66.09, 12.53, 39.31),
        row(51.35, 45.01, 48.18),
        row(0.00, 66.66, 33.33),
    ],
    avg_row: Some(row(46.03, 31.30, 38.66)),
    avg_macro: Some(38.66),
};

pub const LOG_LIKELIHOOD: RefTable = RefTable {
    detector: "log-likelihood",
    rows: [
        row(66.72, 0.50, 33.61),
        row(64.95, 25.10, 45.03),
        row(60.10, 37.76, 48.93),
        row(0.00, 66.66, 33.33),
    ],
    avg_row: Some(row(47.94, 32.51, 40.23)),
    avg_macro: Some(40.23),
};

pub const LOG_RANK: RefTable = RefTable {
    detector: "log-rank",
    rows: [
        row(66.72, 0.50, 33.61),
        row(65.22, 21.91, 43.56),
        row(60.18, 34.16, 47.17),
        row(0.00, 66.66, 33.33),
    ],
    avg_row: Some(row(48.03, 30.81, 39.42)),
    avg_macro: Some(39.42),
};

pub const BINOCULARS: RefTable = RefTable {
    detector: "binoculars",
    rows: [
        row(66.67, 1.97, 34.32),
        row(65.61, 57.86, 61.73),
        row(63.75, 74.41, 69.08),
        row(66.67, 0.99, 33.83),
    ],
    avg_row: Some(row(65.68, 33.81, 49.74)),
    avg_macro: Some(49.74),
};

pub const QWEN_TP1: RefTable = RefTable {
    detector: "qwen:TP1",
    rows: [
        row(0.50, 66.39, 33.44),
        row(2.93, 66.67, 34.80),
        row(0.00, 66.33, 33.16),
        row(0.50, 66.39, 33.44),
    ],
    avg_row: None,
    avg_macro: Some(33.71),
};

pub const QWEN_TP2: RefTable = RefTable {
    detector: "qwen:TP2",
    rows: [
        row(20.69, 67.61, 44.15),
        row(27.29, 67.81, 47.55),
        row(3.66, 63.80, 33.73),
        row(18.26, 67.02, 42.64),
    ],
    avg_row: None,
    avg_macro: Some(42.02),
};

pub const GPT5_TP1: RefTable = RefTable {
    detector: "gpt-5:TP1",
    rows: [
        row(72.21, 76.44, 74.33),
        row(66.30, 72.15, 69.23),
        row(29.14, 62.99, 46.07),
        row(32.50, 63.65, 48.08),
    ],
    avg_row: None,
    avg_macro: Some(59.43),
};

pub const GPT5_TP2: RefTable = RefTable {
    detector: "gpt-5:TP2",
    rows: [
        row(77.27, 72.22, 74.75),
        row(74.73, 66.67, 70.70),
        row(46.26, 52.82, 49.54),
        row(78.50, 75.27, 76.89),
    ],
    avg_row: None,
    avg_macro: Some(67.97),
};

pub const GEMINI_TP1: RefTable = RefTable {
    detector: "gemini:TP1",
    rows: [
        row(80.63, 82.52, 81.58),
        row(72.03, 77.80, 74.92),
        row(64.78, 74.62, 69.70),
        row(42.16, 67.64, 54.90),
    ],
    avg_row: None,
    avg_macro: Some(70.28),
};

pub const GEMINI_TP2: RefTable = RefTable {
    detector: "gemini:TP2",
    rows: [
        row(86.49, 87.24, 86.86),
        row(74.93, 80.00, 77.46),
        row(63.94, 74.68, 69.31),
        row(83.70, 84.99, 84.35),
    ],
    avg_row: None,
    avg_macro: Some(79.50),
};

pub const GEMINI_IP2: RefTable = RefTable {
    detector: "gemini:IP2",
    rows: [
        row(89.00, 88.23, 88.61),
        row(80.21, 81.96, 81.08),
        row(64.53, 73.44, 68.99),
        row(83.44, 84.29, 83.86),
    ],
    avg_row: None,
    avg_macro: Some(80.64),
};

pub const GEMINI_IP3: RefTable = RefTable {
    detector: "gemini:IP3",
    rows: [
        row(91.68, 92.06, 91.87),
        row(78.77, 84.19, 81.48),
        row(69.47, 79.54, 74.51),
        row(94.59, 94.90, 94.75),
    ],
    avg_row: None,
    avg_macro: Some(85.65),
};

pub const QWEN_IP3: RefTable = RefTable {
    detector: "qwen:IP3",
    rows: [
        row(63.43, 63.07, 63.25),
        row(62.93, 61.03, 61.98),
        row(38.17, 54.76, 46.46),
        row(76.99, 72.93, 74.96),
    ],
    avg_row: None,
    avg_macro: Some(61.66),
};

pub fn all_tables() -> Vec<RefTable> {
    vec![
        ROBERTA,
        FAST_DETECT_GPT,
        LRR,
        LOG_LIKELIHOOD,
        LOG_RANK,
        BINOCULARS,
        QWEN_TP1,
        QWEN_TP2,
        GPT5_TP1,
        GPT5_TP2,
        GEMINI_TP1,
        GEMINI_TP2,
        GEMINI_IP2,
        GEMINI_IP3,
        QWEN_IP3,
    ]
}

/// The traditional-detector Macro-F1 summary grid: per-generator columns,
/// printed per-detector averages, and the printed per-generator average
/// row (mean over the six detectors, RoBERTa included).
pub struct SummaryGrid {
    pub detectors: [&'static str; 6],
    pub macros: [[f64; 4]; 6],
    pub printed_detector_avg: [f64; 6],
    pub printed_generator_avg: [f64; 4],
    pub printed_overall_avg: f64,
}

pub const TRADITIONAL_SUMMARY: SummaryGrid = SummaryGrid {
    detectors: [
        "fast-detect-gpt",
        "lrr",
        "log-likelihood",
        "log-rank",
        "binoculars",
        "roberta",
    ],
    macros: [
        [33.33, 51.96, 62.73, 33.28],
        [33.83, 39.31, 48.18, 33.33],
        [33.61, 45.03, 48.93, 33.33],
        [33.61, 43.56, 47.17, 33.33],
        [34.32, 61.73, 69.08, 33.83],
        [89.44, 73.31, 78.44, 96.74],
    ],
    printed_detector_avg: [45.33, 38.66, 40.23, 39.42, 49.74, 84.48],
    printed_generator_avg: [43.02, 52.48, 59.09, 43.97],
    printed_overall_avg: 49.64,
};
