//! Dataset construction: generate an AI counterpart for a human poem, and
//! one image per human poem.
//!
//! The poem generation prompt asks for a new poem with the same title,
//! theme, meaning, imagery and emotion that retains all the nouns of the
//! original in a different style; generation runs at temperature 1.5 and
//! top_p 0.95. The image prompt asks for a realistic-style image carrying
//! every noun element of the poem with no text of any form.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Authorship, ImageAsset, MediaType, Poem};
use crate::judge::backend::ChatBackend;
use crate::judge::{JudgeError, Message, MessageSequence, Role, Segment};

/// Sampling settings for poem generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f64,
    pub top_p: f64,
    pub model_id: String,
}

impl GenParams {
    /// The recommended generation hyperparameters: temperature 1.5,
    /// top_p 0.95.
    pub fn for_model(model_id: impl Into<String>) -> GenParams {
        GenParams {
            temperature: 1.5,
            top_p: 0.95,
            model_id: model_id.into(),
        }
    }
}

pub const POEM_PROMPT_TEMPLATE: &str = r#"Please create a new modern Chinese poem. It must share the same title as the poem provided below, and its theme, meaning, imagery, emotion/feeling, etc., must be completely identical to the original. Furthermore, it must retain all the nouns from the provided poem but be composed in a completely different writing style. The output should contain only the poem itself, without any parsing, analysis, or indication of poetic genre.
Poem: {{P_i}}"#;

pub const IMAGE_PROMPT_TEMPLATE: &str = r#"Please generate a realistic-style image for the following modern Chinese poem, paying special attention to its title, theme, meaning, imagery, and emotion/feeling. The image must depict all the noun elements present in the poem.
Important Note: It is absolutely prohibited to include any form of text in the image—including Chinese characters, letters, numbers, symbols, or any text-like elements. Any textual content would severely degrade the image quality. You must avoid generating any text 100%.
Poem: {{P_i}}"#;

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("poem {0} is not human-written")]
    NotHumanPoem(String),
    #[error("generation returned no poem lines")]
    EmptyGeneration,
    #[error("decode error: {0}")]
    Decode(String),
    #[error(transparent)]
    Backend(#[from] JudgeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GenError {
    pub fn is_fatal(&self) -> bool {
        matches!(self, GenError::Backend(e) if e.is_fatal())
    }
}

/// Advisory notes attached to a generated poem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenWarning {
    /// The response led with a different title; it was overwritten with
    /// the human poem's title.
    TitleOverwritten { generated: String },
    /// Human-poem CJK characters missing from the AI poem. Noun retention
    /// is not enforced; this is an advisory signal only.
    MissingCjkChars { chars: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedPoem {
    pub poem: Poem,
    pub warnings: Vec<GenWarning>,
}

/// Fill the poem prompt with the human poem (title plus body).
pub fn build_poem_prompt(human: &Poem) -> Result<String, GenError> {
    if !human.authorship.is_human() {
        return Err(GenError::NotHumanPoem(human.id.clone()));
    }
    Ok(POEM_PROMPT_TEMPLATE.replace("{{P_i}}", &human.full_text()))
}

/// Fill the image prompt with the human poem (title plus body).
pub fn build_image_prompt(human: &Poem) -> Result<String, GenError> {
    if !human.authorship.is_human() {
        return Err(GenError::NotHumanPoem(human.id.clone()));
    }
    Ok(IMAGE_PROMPT_TEMPLATE.replace("{{P_i}}", &human.full_text()))
}

/// Parse a generation response into a poem body.
///
/// The response is trimmed; if its first non-empty line equals the
/// requested title, that line is consumed as the title. Everything else
/// becomes the body (stanzas split on blank lines). The output title is
/// always the human title; a differing leading line is kept in the body
/// and flagged.
fn parse_generated(
    response: &str,
    human: &Poem,
    ai_id: &str,
    generator_id: &str,
) -> Result<GeneratedPoem, GenError> {
    let trimmed = response.trim();
    if trimmed.is_empty() {
        return Err(GenError::EmptyGeneration);
    }
    let mut warnings = Vec::new();
    let first_line = trimmed.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let body_text = if first_line.trim() == human.title {
        trimmed
            .lines()
            .skip_while(|l| l.trim().is_empty())
            .skip(1)
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        warnings.push(GenWarning::TitleOverwritten {
            generated: first_line.trim().to_string(),
        });
        trimmed.to_string()
    };
    let poem = Poem::from_plain_text(
        ai_id,
        human.title.clone(),
        &body_text,
        Authorship::Ai {
            generator_id: generator_id.to_string(),
        },
    )
    .normalized();
    if poem.validate().is_err() {
        return Err(GenError::EmptyGeneration);
    }
    if let Some(missing) = missing_cjk_chars(human, &poem) {
        warnings.push(GenWarning::MissingCjkChars { chars: missing });
    }
    Ok(GeneratedPoem { poem, warnings })
}

/// Human-poem CJK characters absent from the AI poem, as one string, or
/// None when every character is retained.
pub fn missing_cjk_chars(human: &Poem, ai: &Poem) -> Option<String> {
    let ai_text = ai.body_text();
    let mut missing: Vec<char> = human
        .body_text()
        .chars()
        .filter(|c| is_cjk_char(*c) && !ai_text.contains(*c))
        .collect();
    missing.sort_unstable();
    missing.dedup();
    if missing.is_empty() {
        None
    } else {
        Some(missing.into_iter().collect())
    }
}

fn is_cjk_char(c: char) -> bool {
    matches!(u32::from(c), 0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0xF900..=0xFAFF)
}

/// Generate the AI counterpart of a human poem. The prompt goes out as a
/// single user message; the resulting poem shares the human title.
pub fn generate_poem(
    human: &Poem,
    params: &GenParams,
    backend: &dyn ChatBackend,
    ai_id: &str,
) -> Result<GeneratedPoem, GenError> {
    let prompt = build_poem_prompt(human)?;
    let messages = MessageSequence {
        messages: vec![Message {
            role: Role::User,
            segments: vec![Segment::Text(prompt)],
        }],
    };
    let response = backend.complete(&messages)?;
    parse_generated(&response, human, ai_id, &params.model_id)
}

// ---------------------------------------------------------------------------
// Image generation
// ---------------------------------------------------------------------------

/// Connection settings for a text-to-image backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageBackendConfig {
    pub endpoint_url: String,
    pub model_id: String,
    #[serde(default = "default_image_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_image_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub auth_token_env: String,
}

fn default_image_timeout_ms() -> u64 {
    120_000
}

fn default_image_retries() -> u32 {
    2
}

/// Anything that can turn a prompt into image bytes.
pub trait ImageBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn generate(&self, prompt: &str) -> Result<Vec<u8>, GenError>;
}

/// HTTP image backend. The response may carry the image inline as base64
/// (`data[0].b64_json`) or as a URL (`data[0].url`) that is then fetched.
pub struct HttpImageBackend {
    config: ImageBackendConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ImagesResponse {
    data: Vec<ImageDatum>,
}

#[derive(Deserialize)]
struct ImageDatum {
    #[serde(default)]
    b64_json: Option<String>,
    #[serde(default)]
    url: Option<String>,
}

impl HttpImageBackend {
    pub fn new(config: ImageBackendConfig) -> Result<HttpImageBackend, GenError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| GenError::Backend(JudgeError::Transport(e.to_string())))?;
        Ok(HttpImageBackend { config, client })
    }

    fn fetch_once(&self, prompt: &str, token: Option<&str>) -> Result<Vec<u8>, GenError> {
        let body = serde_json::json!({
            "model": self.config.model_id,
            "prompt": prompt,
        });
        let mut req = self.client.post(&self.config.endpoint_url).json(&body);
        if let Some(tok) = token {
            req = req.bearer_auth(tok);
        }
        let resp = req
            .send()
            .map_err(|e| GenError::Backend(JudgeError::Transport(e.to_string())))?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(GenError::Backend(JudgeError::Auth(format!(
                "server rejected credentials: {status}"
            ))));
        }
        if !status.is_success() {
            return Err(GenError::Backend(JudgeError::Transport(format!(
                "server returned {status}"
            ))));
        }
        let parsed: ImagesResponse = resp
            .json()
            .map_err(|e| GenError::Decode(e.to_string()))?;
        let datum = parsed
            .data
            .into_iter()
            .next()
            .ok_or_else(|| GenError::Decode("response has no image data".into()))?;
        if let Some(b64) = datum.b64_json {
            use base64::Engine;
            return base64::engine::general_purpose::STANDARD
                .decode(b64.trim())
                .map_err(|e| GenError::Decode(e.to_string()));
        }
        if let Some(url) = datum.url {
            let bytes = self
                .client
                .get(&url)
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.bytes())
                .map_err(|e| GenError::Backend(JudgeError::Transport(e.to_string())))?;
            return Ok(bytes.to_vec());
        }
        Err(GenError::Decode("image datum has neither b64_json nor url".into()))
    }

    fn auth_token(&self) -> Result<Option<String>, GenError> {
        if self.config.auth_token_env.is_empty() {
            return Ok(None);
        }
        match std::env::var(&self.config.auth_token_env) {
            Ok(tok) if !tok.is_empty() => Ok(Some(tok)),
            _ => Err(GenError::Backend(JudgeError::Auth(format!(
                "environment variable {} is not set",
                self.config.auth_token_env
            )))),
        }
    }
}

impl ImageBackend for HttpImageBackend {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn generate(&self, prompt: &str) -> Result<Vec<u8>, GenError> {
        let token = self.auth_token()?;
        let mut last = None;
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(crate::scorebackend::http::backoff_delay(attempt));
            }
            match self.fetch_once(prompt, token.as_deref()) {
                Ok(bytes) => return Ok(bytes),
                Err(e @ GenError::Backend(JudgeError::Transport(_))) => last = Some(e),
                Err(fatal) => return Err(fatal),
            }
        }
        Err(last.unwrap_or_else(|| GenError::Decode("no attempts made".into())))
    }
}

/// A 1x1 white PNG.
pub const TINY_PNG: &[u8] = &[
    0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A, 0x00, 0x00, 0x00, 0x0D, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00, 0x00, 0x90,
    0x77, 0x53, 0xDE, 0x00, 0x00, 0x00, 0x0C, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9C, 0x63, 0xF8,
    0xCF, 0xC0, 0x00, 0x00, 0x00, 0x03, 0x00, 0x01, 0x5B, 0xF0, 0x2A, 0xC1, 0x00, 0x00, 0x00,
    0x00, 0x49, 0x45, 0x4E, 0x44, 0xAE, 0x42, 0x60, 0x82,
];

/// Mock image backend returning a fixed tiny PNG (or arbitrary bytes for
/// failure-path tests), with call counting.
pub struct MockImageBackend {
    payload: Vec<u8>,
    calls: std::sync::atomic::AtomicUsize,
}

impl MockImageBackend {
    pub fn tiny_png() -> MockImageBackend {
        MockImageBackend {
            payload: TINY_PNG.to_vec(),
            calls: std::sync::atomic::AtomicUsize::new(0),
        }
    }

    pub fn with_payload(payload: Vec<u8>) -> MockImageBackend {
        MockImageBackend {
            payload,
            calls: std::sync::atomic::AtomicUsize::new(0),
        }
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(std::sync::atomic::Ordering::SeqCst)
    }
}

impl ImageBackend for MockImageBackend {
    fn model_id(&self) -> &str {
        "mock-image"
    }

    fn generate(&self, _prompt: &str) -> Result<Vec<u8>, GenError> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        Ok(self.payload.clone())
    }
}

fn sniff_media_type(bytes: &[u8]) -> Option<MediaType> {
    if bytes.starts_with(MediaType::Png.magic()) {
        Some(MediaType::Png)
    } else if bytes.starts_with(MediaType::Jpeg.magic()) {
        Some(MediaType::Jpeg)
    } else {
        None
    }
}

fn extension(media_type: MediaType) -> &'static str {
    match media_type {
        MediaType::Png => "png",
        MediaType::Jpeg => "jpg",
    }
}

/// Generate (or reuse) the image for a human poem and persist it under
/// `media_dir/images/`. A sidecar metadata file keyed by the prompt digest
/// makes repeated calls free: if the stored digest matches, the backend is
/// not called.
pub fn request_image(
    human: &Poem,
    backend: &dyn ImageBackend,
    media_dir: &Path,
) -> Result<ImageAsset, GenError> {
    let prompt = build_image_prompt(human)?;
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    let prompt_digest = hex::encode(hasher.finalize());

    let image_id = format!("img-{}", human.id);
    let meta_path = media_dir.join("images").join(format!("{image_id}.meta.json"));
    if let Ok(bytes) = std::fs::read(&meta_path) {
        if let Ok(existing) = serde_json::from_slice::<ImageAsset>(&bytes) {
            if existing.prompt_digest == prompt_digest
                && existing.resolved_path(media_dir).exists()
            {
                return Ok(existing);
            }
        }
    }

    let payload = backend.generate(&prompt)?;
    let media_type = sniff_media_type(&payload)
        .ok_or_else(|| GenError::Decode("backend returned a non-image payload".into()))?;
    let rel_path: PathBuf = ["images", &format!("{image_id}.{}", extension(media_type))]
        .iter()
        .collect();
    let abs = media_dir.join(&rel_path);
    std::fs::create_dir_all(abs.parent().expect("images dir"))?;
    std::fs::write(&abs, &payload)?;

    let asset = ImageAsset {
        image_id,
        source_human_id: human.id.clone(),
        media_path: rel_path.to_string_lossy().replace('\\', "/"),
        media_type,
        generator_model: backend.model_id().to_string(),
        prompt_digest,
    };
    std::fs::write(&meta_path, serde_json::to_vec(&asset).expect("serializable"))?;
    Ok(asset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::backend::MockChatBackend;

    fn human() -> Poem {
        Poem::from_plain_text(
            "h1",
            "河流",
            "黑夜里的河流\n带走一枚落叶\n\n石头沉默\n像未说出的话",
            Authorship::Human,
        )
    }

    #[test]
    fn default_params_match_recommended_hyperparameters() {
        let p = GenParams::for_model("gen-x");
        assert_eq!(p.temperature, 1.5);
        assert_eq!(p.top_p, 0.95);
        assert_eq!(p.model_id, "gen-x");
    }

    #[test]
    fn generate_poem_round_trip() {
        let response = "河流\n落叶顺水而下\n黑夜合拢\n\n石头开口\n说出那句话";
        let backend = MockChatBackend::fixed(response);
        let out = generate_poem(&human(), &GenParams::for_model("gen-x"), &backend, "a1").unwrap();
        assert_eq!(out.poem.title, "河流");
        assert_eq!(out.poem.stanza_count(), 2);
        assert_eq!(
            out.poem.authorship,
            Authorship::Ai {
                generator_id: "gen-x".into()
            }
        );
        assert!(out.poem.validate().is_ok());
        // The leading title line was consumed, not kept in the body.
        assert!(!out.poem.body_text().contains("河流\n落叶"));
    }

    #[test]
    fn generated_title_mismatch_is_overwritten_with_warning() {
        let response = "另一个标题\n一行诗\n又一行";
        let backend = MockChatBackend::fixed(response);
        let out = generate_poem(&human(), &GenParams::for_model("g"), &backend, "a1").unwrap();
        assert_eq!(out.poem.title, "河流");
        assert!(out
            .warnings
            .iter()
            .any(|w| matches!(w, GenWarning::TitleOverwritten { .. })));
        // The unrecognized first line stays in the body.
        assert!(out.poem.body_text().contains("另一个标题"));
    }

    #[test]
    fn empty_response_is_empty_generation() {
        let backend = MockChatBackend::fixed("");
        let err = generate_poem(&human(), &GenParams::for_model("g"), &backend, "a1").unwrap_err();
        assert!(matches!(err, GenError::EmptyGeneration));
    }

    #[test]
    fn ai_input_rejected() {
        let ai = Poem {
            authorship: Authorship::Ai {
                generator_id: "g".into(),
            },
            ..human()
        };
        assert!(matches!(
            build_image_prompt(&ai),
            Err(GenError::NotHumanPoem(_))
        ));
        assert!(matches!(
            build_poem_prompt(&ai),
            Err(GenError::NotHumanPoem(_))
        ));
    }

    #[test]
    fn image_prompts_differ_only_in_poem_segment() {
        let a = build_image_prompt(&human()).unwrap();
        let other = Poem::from_plain_text("h2", "雪", "雪落下来\n盖住台阶", Authorship::Human);
        let b = build_image_prompt(&other).unwrap();
        let prefix = IMAGE_PROMPT_TEMPLATE.split("{{P_i}}").next().unwrap();
        assert!(a.starts_with(prefix));
        assert!(b.starts_with(prefix));
        assert_ne!(a, b);
    }

    #[test]
    fn missing_cjk_chars_advisory() {
        let h = human();
        let ai = Poem::from_plain_text(
            "a1",
            "河流",
            "河流带走落叶\n黑夜里石头沉默",
            Authorship::Ai {
                generator_id: "g".into(),
            },
        );
        let missing = missing_cjk_chars(&h, &ai).unwrap();
        // "像未说出的话" characters are gone, among others.
        assert!(missing.contains('像'));
        assert!(!missing.contains('河'));
    }

    #[test]
    fn pairing_closure_after_generation() {
        use crate::corpus::{ingest_corpus, ManifestRecord, PoemPair};
        // A fixed mock response never matches the requested titles, so the
        // title rule injects them; the resulting pairs must still pass
        // full corpus validation.
        let backend = MockChatBackend::fixed("雾散开\n桥露出另一端");
        let params = GenParams::for_model("gen-x");
        let humans = [
            human(),
            Poem::from_plain_text("h2", "灯塔", "灯塔数着船\n雾把光举高", Authorship::Human),
        ];
        let mut manifest = String::new();
        for human in &humans {
            let out = generate_poem(human, &params, &backend, &format!("ai-{}", human.id)).unwrap();
            let pair = PoemPair {
                pair_id: format!("pair-{}", human.id),
                human_id: human.id.clone(),
                ai_id: out.poem.id.clone(),
                generator_id: "gen-x".into(),
            };
            for record in [
                ManifestRecord::Poem(human.clone()),
                ManifestRecord::Poem(out.poem),
                ManifestRecord::Pair(pair),
            ] {
                manifest.push_str(&serde_json::to_string(&record).unwrap());
                manifest.push('\n');
            }
        }
        let corpus = ingest_corpus(Path::new("."), std::io::Cursor::new(manifest)).unwrap();
        assert_eq!(corpus.pair_count(), 2);
    }

    #[test]
    fn request_image_persists_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let backend = MockImageBackend::tiny_png();
        let asset = request_image(&human(), &backend, dir.path()).unwrap();
        assert_eq!(asset.media_type, MediaType::Png);
        assert_eq!(asset.source_human_id, "h1");
        assert!(asset.resolved_path(dir.path()).exists());
        assert_eq!(asset.prompt_digest.len(), 64);

        let again = request_image(&human(), &backend, dir.path()).unwrap();
        assert_eq!(asset, again);
        assert_eq!(backend.call_count(), 1, "second call must reuse the stored image");
    }

    #[test]
    fn text_payload_is_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let backend = MockImageBackend::with_payload(b"sorry, no image".to_vec());
        let err = request_image(&human(), &backend, dir.path()).unwrap_err();
        assert!(matches!(err, GenError::Decode(_)));
    }
}
