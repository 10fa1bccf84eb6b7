//! Chat backends for judge and generation prompts: a multimodal HTTP
//! client speaking the chat-completions shape, and a scripted mock for
//! tests and offline runs.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{JudgeError, Message, MessageSequence, Role, Segment};
use crate::corpus::MediaType;
use crate::scorebackend::http::backoff_delay;

/// Connection settings for a chat backend. Temperature defaults to 0 so
/// detection is as deterministic as the backend allows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatBackendConfig {
    pub endpoint_url: String,
    pub model_id: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub auth_token_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_max_retries() -> u32 {
    2
}

fn default_max_output_tokens() -> u32 {
    64
}

/// Anything that can answer a built prompt with raw text.
pub trait ChatBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, messages: &MessageSequence) -> Result<String, JudgeError>;
}

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

pub struct HttpChatBackend {
    config: ChatBackendConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

fn media_mime(media_type: MediaType) -> &'static str {
    match media_type {
        MediaType::Png => "image/png",
        MediaType::Jpeg => "image/jpeg",
    }
}

/// Render messages in the chat-completions JSON shape; images travel as
/// base64 data URIs in `image_url` parts.
fn messages_to_json(seq: &MessageSequence) -> Vec<serde_json::Value> {
    seq.messages
        .iter()
        .map(|Message { role, segments }| {
            let role = match role {
                Role::System => "system",
                Role::User => "user",
            };
            let has_images = segments.iter().any(|s| matches!(s, Segment::Image(_)));
            if !has_images {
                let text: String = segments
                    .iter()
                    .filter_map(|s| match s {
                        Segment::Text(t) => Some(t.as_str()),
                        Segment::Image(_) => None,
                    })
                    .collect();
                json!({ "role": role, "content": text })
            } else {
                let parts: Vec<serde_json::Value> = segments
                    .iter()
                    .map(|s| match s {
                        Segment::Text(t) => json!({ "type": "text", "text": t }),
                        Segment::Image(img) => {
                            let url = format!(
                                "data:{};base64,{}",
                                media_mime(img.media_type),
                                BASE64.encode(&img.bytes)
                            );
                            json!({ "type": "image_url", "image_url": { "url": url } })
                        }
                    })
                    .collect();
                json!({ "role": role, "content": parts })
            }
        })
        .collect()
}

impl HttpChatBackend {
    pub fn new(config: ChatBackendConfig) -> Result<HttpChatBackend, JudgeError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| JudgeError::Transport(e.to_string()))?;
        Ok(HttpChatBackend { config, client })
    }

    fn auth_token(&self) -> Result<Option<String>, JudgeError> {
        if self.config.auth_token_env.is_empty() {
            return Ok(None);
        }
        match std::env::var(&self.config.auth_token_env) {
            Ok(tok) if !tok.is_empty() => Ok(Some(tok)),
            _ => Err(JudgeError::Auth(format!(
                "environment variable {} is not set",
                self.config.auth_token_env
            ))),
        }
    }

    fn send_once(
        &self,
        body: &serde_json::Value,
        token: Option<&str>,
    ) -> Result<Result<String, JudgeError>, JudgeError> {
        // Outer Err = retryable, inner Err = fatal.
        let mut req = self.client.post(&self.config.endpoint_url).json(body);
        if let Some(tok) = token {
            req = req.bearer_auth(tok);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Err(JudgeError::Transport(e.to_string())),
        };
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Ok(Err(JudgeError::Auth(format!(
                "server rejected credentials: {status}"
            ))));
        }
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(JudgeError::Transport(format!("server returned {status}")));
        }
        if !status.is_success() {
            return Ok(Err(JudgeError::Protocol(format!(
                "server returned {status}"
            ))));
        }
        let parsed: ChatResponse = match resp.json() {
            Ok(p) => p,
            Err(e) => return Ok(Err(JudgeError::Protocol(e.to_string()))),
        };
        let choice = match parsed.choices.into_iter().next() {
            Some(c) => c,
            None => return Ok(Err(JudgeError::Protocol("response has no choices".into()))),
        };
        if choice.finish_reason.as_deref() == Some("length") {
            return Ok(Err(JudgeError::ResponseTooLong));
        }
        Ok(Ok(choice.message.content.unwrap_or_default()))
    }
}

impl ChatBackend for HttpChatBackend {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn complete(&self, messages: &MessageSequence) -> Result<String, JudgeError> {
        let token = self.auth_token()?;
        let body = json!({
            "model": self.config.model_id,
            "messages": messages_to_json(messages),
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        });
        let mut last = None;
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(backoff_delay(attempt));
            }
            match self.send_once(&body, token.as_deref()) {
                Ok(outcome) => return outcome,
                Err(retryable) => last = Some(retryable),
            }
        }
        Err(last.unwrap_or_else(|| JudgeError::Transport("no attempts made".into())))
    }
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

enum MockBehavior {
    /// Same response for every call.
    Fixed(String),
    /// Responses consumed in order; empty queue answers the last one.
    Script(Mutex<VecDeque<String>>),
    /// Response picked by prompt digest, stable under parallelism.
    Keyed(Vec<String>),
}

/// In-process chat backend with call counting, concurrency tracking, and
/// failure injection.
pub struct MockChatBackend {
    behavior: MockBehavior,
    model_id: String,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    /// Calls beyond this budget fail with a transport error.
    succeed_limit: Option<usize>,
    delay: Duration,
}

impl MockChatBackend {
    fn with_behavior(behavior: MockBehavior) -> MockChatBackend {
        MockChatBackend {
            behavior,
            model_id: "mock-chat".to_string(),
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            succeed_limit: None,
            delay: Duration::ZERO,
        }
    }

    pub fn fixed(response: impl Into<String>) -> MockChatBackend {
        Self::with_behavior(MockBehavior::Fixed(response.into()))
    }

    pub fn scripted(responses: Vec<String>) -> MockChatBackend {
        Self::with_behavior(MockBehavior::Script(Mutex::new(responses.into())))
    }

    pub fn keyed(responses: Vec<String>) -> MockChatBackend {
        assert!(!responses.is_empty(), "keyed mock needs at least one response");
        Self::with_behavior(MockBehavior::Keyed(responses))
    }

    pub fn with_model_id(mut self, id: impl Into<String>) -> Self {
        self.model_id = id.into();
        self
    }

    /// Fail every call after the first `n` with a transport error.
    pub fn succeed_only(mut self, n: usize) -> Self {
        self.succeed_limit = Some(n);
        self
    }

    /// Hold each call open for `delay`, making overlap observable.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of calls observed in flight at once.
    pub fn max_concurrency(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }
}

impl ChatBackend for MockChatBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, messages: &MessageSequence) -> Result<String, JudgeError> {
        let call_index = self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let result = if self.succeed_limit.is_some_and(|limit| call_index >= limit) {
            Err(JudgeError::Transport("mock backend interrupted".into()))
        } else {
            Ok(match &self.behavior {
                MockBehavior::Fixed(r) => r.clone(),
                MockBehavior::Script(queue) => {
                    let mut q = queue.lock().expect("mock script lock");
                    if q.len() > 1 {
                        q.pop_front().expect("non-empty")
                    } else {
                        q.front().cloned().unwrap_or_default()
                    }
                }
                MockBehavior::Keyed(responses) => {
                    let digest = messages.digest();
                    let idx = u64::from_str_radix(&digest[..8], 16).expect("hex digest")
                        % responses.len() as u64;
                    responses[idx as usize].clone()
                }
            })
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }
}
