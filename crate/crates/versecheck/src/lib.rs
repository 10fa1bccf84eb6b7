//! Detection toolkit for AI-generated modern Chinese poetry.
//!
//! The library has three layers:
//!
//! - **Dataset**: [`corpus`] models poems, human/AI pairs, images, and
//!   train/test splits; [`genkit`] holds the dataset-construction clients
//!   (poem generation from human poems, one image per human poem).
//! - **Detection**: [`scorebackend`] fetches per-token log-probabilities
//!   from a causal language model (HTTP or deterministic mock);
//!   [`statdetect`] computes the five statistical zero-shot detectors and
//!   calibrates decision thresholds; [`judge`] builds the four LLM-judge
//!   prompt protocols (TP1, TP2, IP2, IP3), talks to a multimodal chat
//!   backend, and parses verdicts.
//! - **Evaluation**: [`eval`] computes F1_AI / F1_Human / Macro-F1 per
//!   generator and renders report tables; [`commands`] wires everything
//!   into reproducible, config-driven runs behind the `versecheck` binary.
//!
//! See the crate's `examples/` directory for one runnable example per
//! capability.

pub mod commands;
pub mod config;
pub mod corpus;
pub mod genkit;
pub mod judge;
pub mod eval;
pub mod scorebackend;
pub mod statdetect;

pub use corpus::{Corpus, Poem, PoemPair};
pub use eval::Label;
pub use scorebackend::SequenceScore;
pub use statdetect::{Detector, DetectorScore, Threshold};
