//! LLM-judge detection: prompt assembly, verdict parsing, chat backends,
//! and checkpointed batch runs.
//!
//! A [`JudgeRequest`] names a prompt kind, an optional example pair (with
//! its image for the image-guided kinds), the target poem, and the target
//! image. [`build_prompt`] renders it into a [`MessageSequence`] — a
//! system persona message plus one user message whose image placeholders
//! become inline attachments in document order. For the two members of a
//! poem pair the built prompts differ only in the target poem segment:
//! the example block and the target image bytes are identical.

pub mod backend;
pub mod batch;
pub mod templates;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{ImageAsset, MediaType, Poem};
use crate::eval::Label;
pub use templates::{PromptKind, PromptLanguage};

/// One example pair shown to the judge before the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeExample {
    pub human_poem: Poem,
    pub ai_poem: Poem,
    pub image: Option<ImageAsset>,
}

/// A fully specified judgment of one target poem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub kind: PromptKind,
    pub example: Option<JudgeExample>,
    pub target_poem: Poem,
    /// Image generated from the target pair's human poem; the same image
    /// serves both the human and the AI member of the pair.
    pub target_image: Option<ImageAsset>,
    #[serde(default)]
    pub language: PromptLanguage,
}

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("{0} requires an example pair")]
    MissingExample(PromptKind),
    #[error("{0} requires example and target images")]
    MissingImage(PromptKind),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("media error: {0}")]
    Media(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("auth error: {0}")]
    Auth(String),
    #[error("response exceeded the output token budget")]
    ResponseTooLong,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("batch aborted by an earlier fatal error")]
    Aborted,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl JudgeError {
    /// Fatal errors abort a whole batch instead of failing one item.
    pub fn is_fatal(&self) -> bool {
        matches!(self, JudgeError::Auth(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
}

/// Inline image attachment.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePayload {
    pub media_type: MediaType,
    #[serde(with = "base64_bytes")]
    pub bytes: Vec<u8>,
}

impl std::fmt::Debug for ImagePayload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ImagePayload({:?}, {} bytes)", self.media_type, self.bytes.len())
    }
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        STANDARD.encode(bytes).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        STANDARD.decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Text(String),
    Image(ImagePayload),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub segments: Vec<Segment>,
}

/// An ordered prompt: a system persona message and one user message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageSequence {
    pub messages: Vec<Message>,
}

impl MessageSequence {
    pub fn attachments(&self) -> Vec<&ImagePayload> {
        self.messages
            .iter()
            .flat_map(|m| m.segments.iter())
            .filter_map(|s| match s {
                Segment::Image(img) => Some(img),
                Segment::Text(_) => None,
            })
            .collect()
    }

    /// Plain-text rendering: message texts under `[role]` markers, image
    /// attachments as one-line digests. Used for golden files, dry runs,
    /// and logs.
    pub fn render_transcript(&self) -> String {
        let mut out = String::new();
        for (i, msg) in self.messages.iter().enumerate() {
            if i > 0 {
                out.push_str("\n\n");
            }
            out.push_str(match msg.role {
                Role::System => "[system]\n",
                Role::User => "[user]\n",
            });
            for seg in &msg.segments {
                match seg {
                    Segment::Text(t) => out.push_str(t),
                    Segment::Image(img) => {
                        let mut hasher = Sha256::new();
                        hasher.update(&img.bytes);
                        let digest = hex::encode(&hasher.finalize()[..6]);
                        let kind = match img.media_type {
                            MediaType::Png => "png",
                            MediaType::Jpeg => "jpeg",
                        };
                        out.push_str(&format!("[[image {kind} {digest}]]"));
                    }
                }
            }
        }
        out.push('\n');
        out
    }

    /// Content digest covering roles, text bytes, and image bytes.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for msg in &self.messages {
            hasher.update(match msg.role {
                Role::System => [0u8],
                Role::User => [1u8],
            });
            for seg in &msg.segments {
                match seg {
                    Segment::Text(t) => {
                        hasher.update([b'T']);
                        hasher.update((t.len() as u64).to_le_bytes());
                        hasher.update(t.as_bytes());
                    }
                    Segment::Image(img) => {
                        hasher.update([b'I']);
                        hasher.update((img.bytes.len() as u64).to_le_bytes());
                        hasher.update(&img.bytes);
                    }
                }
            }
        }
        hex::encode(hasher.finalize())
    }
}

fn load_image(asset: &ImageAsset, media_root: &Path) -> Result<ImagePayload, JudgeError> {
    let path = asset.resolved_path(media_root);
    let bytes = std::fs::read(&path)
        .map_err(|e| JudgeError::Media(format!("cannot read {}: {e}", path.display())))?;
    if !bytes.starts_with(asset.media_type.magic()) {
        return Err(JudgeError::Media(format!(
            "{} does not look like {:?}",
            path.display(),
            asset.media_type
        )));
    }
    Ok(ImagePayload {
        media_type: asset.media_type,
        bytes,
    })
}

/// Render a request into messages: the persona sentence as the system
/// message, the filled template as one user message. Image placeholders
/// become attachments in document order, so IP2/IP3 carry exactly two
/// (example image first, then target image).
pub fn build_prompt(request: &JudgeRequest, media_root: &Path) -> Result<MessageSequence, JudgeError> {
    let kind = request.kind;
    let example = match (&request.example, kind.needs_example()) {
        (Some(e), true) => Some(e),
        (None, true) => return Err(JudgeError::MissingExample(kind)),
        (maybe, false) => maybe.as_ref(), // tolerated but unused by TP1
    };
    if let Some(e) = example {
        if e.human_poem.title != e.ai_poem.title {
            return Err(JudgeError::InvalidRequest(format!(
                "example poems have different titles: {:?} vs {:?}",
                e.human_poem.title, e.ai_poem.title
            )));
        }
    }
    let (example_image, target_image) = if kind.needs_images() {
        let ex = example.expect("checked above");
        let ex_asset = ex
            .image
            .as_ref()
            .ok_or(JudgeError::MissingImage(kind))?;
        if ex_asset.source_human_id != ex.human_poem.id {
            return Err(JudgeError::InvalidRequest(format!(
                "example image {} was not generated from example human poem {}",
                ex_asset.image_id, ex.human_poem.id
            )));
        }
        let tgt_asset = request
            .target_image
            .as_ref()
            .ok_or(JudgeError::MissingImage(kind))?;
        (
            Some(load_image(ex_asset, media_root)?),
            Some(load_image(tgt_asset, media_root)?),
        )
    } else {
        (None, None)
    };

    let (system, user_template) = templates::template(kind, request.language);

    let mut segments: Vec<Segment> = Vec::new();
    let mut text_acc = String::new();
    let mut rest = user_template;
    // Placeholders are substituted in document order; image placeholders
    // close the current text segment and insert an attachment.
    while let Some(pos) = rest.find("{{") {
        let (before, from_open) = rest.split_at(pos);
        text_acc.push_str(before);
        let end = from_open
            .find("}}")
            .ok_or_else(|| JudgeError::InvalidRequest("unterminated placeholder".into()))?;
        let placeholder = &from_open[..end + 2];
        rest = &from_open[end + 2..];
        match placeholder {
            templates::PLACEHOLDER_EXAMPLE_HUMAN => {
                let e = example.ok_or(JudgeError::MissingExample(kind))?;
                text_acc.push_str(&e.human_poem.full_text());
            }
            templates::PLACEHOLDER_EXAMPLE_AI => {
                let e = example.ok_or(JudgeError::MissingExample(kind))?;
                text_acc.push_str(&e.ai_poem.full_text());
            }
            templates::PLACEHOLDER_TARGET_POEM => {
                text_acc.push_str(&request.target_poem.full_text());
            }
            templates::PLACEHOLDER_EXAMPLE_IMAGE => {
                segments.push(Segment::Text(std::mem::take(&mut text_acc)));
                segments.push(Segment::Image(
                    example_image.clone().ok_or(JudgeError::MissingImage(kind))?,
                ));
            }
            templates::PLACEHOLDER_TARGET_IMAGE => {
                segments.push(Segment::Text(std::mem::take(&mut text_acc)));
                segments.push(Segment::Image(
                    target_image.clone().ok_or(JudgeError::MissingImage(kind))?,
                ));
            }
            other => {
                return Err(JudgeError::InvalidRequest(format!(
                    "unknown placeholder {other}"
                )));
            }
        }
    }
    text_acc.push_str(rest);
    if !text_acc.is_empty() {
        segments.push(Segment::Text(text_acc));
    }

    Ok(MessageSequence {
        messages: vec![
            Message {
                role: Role::System,
                segments: vec![Segment::Text(system.to_string())],
            },
            Message {
                role: Role::User,
                segments,
            },
        ],
    })
}

/// A planned judgment: the request plus the target's gold label and id.
#[derive(Clone, Debug)]
pub struct PlannedRequest {
    pub request: JudgeRequest,
    pub poem_id: String,
    pub gold: Label,
    pub pair_id: String,
    pub generator_id: String,
}

/// Plan judge requests for a set of target pairs: two per pair (the human
/// member and the AI member), sharing the pair's image for the image
/// kinds. One fixed example pair serves the whole run and must not be
/// among the targets.
pub fn plan_requests(
    corpus: &crate::corpus::Corpus,
    kind: PromptKind,
    language: PromptLanguage,
    example_pair_id: &str,
    target_pair_ids: &[String],
) -> Result<Vec<PlannedRequest>, JudgeError> {
    let example = if kind.needs_example() {
        if target_pair_ids.iter().any(|id| id == example_pair_id) {
            return Err(JudgeError::InvalidRequest(format!(
                "example pair {example_pair_id} is among the judged targets"
            )));
        }
        let pair = corpus.pair(example_pair_id).ok_or_else(|| {
            JudgeError::InvalidRequest(format!("example pair {example_pair_id} not in corpus"))
        })?;
        let human_poem = corpus
            .poem(&pair.human_id)
            .ok_or_else(|| JudgeError::InvalidRequest(format!("missing poem {}", pair.human_id)))?
            .clone();
        let ai_poem = corpus
            .poem(&pair.ai_id)
            .ok_or_else(|| JudgeError::InvalidRequest(format!("missing poem {}", pair.ai_id)))?
            .clone();
        let image = if kind.needs_images() {
            Some(
                corpus
                    .image_for_human_poem(&pair.human_id)
                    .ok_or(JudgeError::MissingImage(kind))?
                    .clone(),
            )
        } else {
            None
        };
        Some(JudgeExample {
            human_poem,
            ai_poem,
            image,
        })
    } else {
        None
    };

    let mut sorted_targets: Vec<&String> = target_pair_ids.iter().collect();
    sorted_targets.sort();
    let mut planned = Vec::with_capacity(sorted_targets.len() * 2);
    for pair_id in sorted_targets {
        let pair = corpus.pair(pair_id).ok_or_else(|| {
            JudgeError::InvalidRequest(format!("target pair {pair_id} not in corpus"))
        })?;
        let target_image = if kind.needs_images() {
            Some(
                corpus
                    .image_for_human_poem(&pair.human_id)
                    .ok_or(JudgeError::MissingImage(kind))?
                    .clone(),
            )
        } else {
            None
        };
        for (poem_id, gold) in [(&pair.human_id, Label::Human), (&pair.ai_id, Label::Ai)] {
            let target_poem = corpus
                .poem(poem_id)
                .ok_or_else(|| JudgeError::InvalidRequest(format!("missing poem {poem_id}")))?
                .clone();
            planned.push(PlannedRequest {
                request: JudgeRequest {
                    kind,
                    example: example.clone(),
                    target_poem,
                    target_image: target_image.clone(),
                    language,
                },
                poem_id: poem_id.clone(),
                gold,
                pair_id: pair.pair_id.clone(),
                generator_id: pair.generator_id.clone(),
            });
        }
    }
    Ok(planned)
}

// ---------------------------------------------------------------------------
// Verdict parsing
// ---------------------------------------------------------------------------

/// Parsed decision from a judge response.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictLabel {
    Ai,
    Human,
    Unparseable,
}

impl VerdictLabel {
    /// Map to a prediction for scoring. Unparseable verdicts count as
    /// misclassifications of the gold class.
    pub fn to_prediction(self, gold: Label) -> Label {
        match self {
            VerdictLabel::Ai => Label::Ai,
            VerdictLabel::Human => Label::Human,
            VerdictLabel::Unparseable => gold.opposite(),
        }
    }
}

/// A judged poem: the request digest, the raw response (always retained
/// for audit), and the parsed decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub request_digest: String,
    pub raw_response: String,
    pub parsed: VerdictLabel,
    pub model_id: String,
    pub latency_ms: u64,
}

/// Characters tolerated around the answer token: brackets, quotes,
/// markdown emphasis, and their fullwidth forms.
fn is_decoration(c: char) -> bool {
    matches!(
        c,
        '[' | ']' | '(' | ')' | '{' | '}' | '"' | '\'' | '*' | '_' | '`' | '#'
            | '【' | '】' | '（' | '）' | '「' | '」' | '『' | '』' | '“' | '”' | '‘' | '’'
    )
}

fn strip_decoration(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || is_decoration(c))
}

/// Try to read an answer token at the start of `s`. Returns the label and
/// whether the match looks like an echo of the literal format string
/// ("[Human or AI]"), which is skipped.
fn leading_answer_token(s: &str) -> Option<(VerdictLabel, bool)> {
    let s = s.trim_start_matches(|c: char| c.is_whitespace() || is_decoration(c));
    let lower = s.to_ascii_lowercase();
    let (label, len) = if lower.starts_with("human") {
        (VerdictLabel::Human, "human".len())
    } else if lower.starts_with("ai") {
        (VerdictLabel::Ai, "ai".len())
    } else {
        return None;
    };
    // The token must not continue into a larger word ("aid", "humanity").
    if s[len..].chars().next().is_some_and(|c| c.is_ascii_alphanumeric()) {
        return None;
    }
    let tail = s[len..].trim_start();
    let echo = tail.to_ascii_lowercase().starts_with("or ")
        || tail.to_ascii_lowercase().starts_with("or]");
    Some((label, echo))
}

/// Extract the Human/AI decision from a raw response.
///
/// Scans for the last `Answer:` (any case, ASCII or fullwidth colon)
/// followed by an AI/Human token, tolerating whitespace, brackets, quotes,
/// and markdown emphasis; echoes of the literal format string are skipped.
/// Falls back to a whole-string match of exactly `AI` or `Human`. Total
/// and idempotent: anything else is `Unparseable`.
pub fn parse_verdict(raw: &str) -> VerdictLabel {
    let lower = raw.to_ascii_lowercase();
    let mut positions: Vec<usize> = Vec::new();
    let mut from = 0;
    while let Some(found) = lower[from..].find("answer") {
        positions.push(from + found);
        from = from + found + "answer".len();
    }
    for start in positions.into_iter().rev() {
        let after_kw = &raw[start + "answer".len()..];
        // Allow spaces and markdown between the keyword and the colon.
        let after_kw_trimmed =
            after_kw.trim_start_matches(|c: char| c.is_whitespace() || c == '*' || c == '_');
        let Some(rest) = after_kw_trimmed
            .strip_prefix(':')
            .or_else(|| after_kw_trimmed.strip_prefix('：'))
        else {
            continue;
        };
        if let Some((label, echo)) = leading_answer_token(rest) {
            if !echo {
                return label;
            }
        }
    }
    // Whole-string fallback: exactly AI or Human up to decoration and a
    // trailing sentence terminator.
    let trimmed = strip_decoration(raw).trim_end_matches(['.', '。', '!', '！']);
    let stripped = strip_decoration(trimmed);
    match stripped.to_ascii_lowercase().as_str() {
        "ai" => VerdictLabel::Ai,
        "human" => VerdictLabel::Human,
        _ => VerdictLabel::Unparseable,
    }
}
