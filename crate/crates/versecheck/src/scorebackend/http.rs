//! HTTP scoring backend speaking the completions-with-logprobs shape:
//! the full text is sent as the prompt with `echo` and `logprobs` set, and
//! the response carries per-token logprobs plus top-k alternatives.
//!
//! Servers that report observed-token ranks directly may include a
//! `token_ranks` array; otherwise ranks are reconstructed client-side from
//! the top-k listing, flooring to top_k + 1 (flagged approximate) when the
//! observed token falls outside it.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendConfig, ScoreBackend, ScoreError, SequenceScore, TokenScore};

pub struct HttpScoreBackend {
    config: BackendConfig,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct CompletionsRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    echo: bool,
    logprobs: u32,
}

#[derive(Deserialize)]
struct CompletionsResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    logprobs: Option<LogprobsPayload>,
}

#[derive(Deserialize)]
struct LogprobsPayload {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    top_logprobs: Option<Vec<Option<BTreeMap<String, f64>>>>,
    /// Non-standard extension: observed-token ranks computed server-side.
    #[serde(default)]
    token_ranks: Option<Vec<Option<u32>>>,
}

impl HttpScoreBackend {
    pub fn new(config: BackendConfig) -> Result<HttpScoreBackend, ScoreError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ScoreError::Transport(e.to_string()))?;
        Ok(HttpScoreBackend { config, client })
    }

    fn auth_token(&self) -> Result<Option<String>, ScoreError> {
        if self.config.auth_token_env.is_empty() {
            return Ok(None);
        }
        match std::env::var(&self.config.auth_token_env) {
            Ok(tok) if !tok.is_empty() => Ok(Some(tok)),
            _ => Err(ScoreError::Auth(format!(
                "environment variable {} is not set",
                self.config.auth_token_env
            ))),
        }
    }

    fn send_once(&self, text: &str, token: Option<&str>) -> Result<SequenceScore, SendFailure> {
        let body = CompletionsRequest {
            model: &self.config.model_id,
            prompt: text,
            max_tokens: 0,
            echo: true,
            logprobs: self.config.top_k,
        };
        let mut req = self.client.post(&self.config.endpoint_url).json(&body);
        if let Some(tok) = token {
            req = req.bearer_auth(tok);
        }
        let resp = req
            .send()
            .map_err(|e| SendFailure::Retryable(ScoreError::Transport(e.to_string())))?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(SendFailure::Fatal(ScoreError::Auth(format!(
                "server rejected credentials: {status}"
            ))));
        }
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(SendFailure::Retryable(ScoreError::Transport(format!(
                "server returned {status}"
            ))));
        }
        if !status.is_success() {
            return Err(SendFailure::Fatal(ScoreError::Protocol(format!(
                "server returned {status}"
            ))));
        }
        let parsed: CompletionsResponse = resp
            .json()
            .map_err(|e| SendFailure::Fatal(ScoreError::Protocol(e.to_string())))?;
        self.interpret(parsed).map_err(SendFailure::Fatal)
    }

    fn interpret(&self, resp: CompletionsResponse) -> Result<SequenceScore, ScoreError> {
        let choice = resp
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ScoreError::Protocol("response has no choices".into()))?;
        let lp = choice
            .logprobs
            .ok_or_else(|| ScoreError::Protocol("response is missing logprobs".into()))?;
        if lp.tokens.len() != lp.token_logprobs.len() {
            return Err(ScoreError::Protocol(
                "tokens and token_logprobs lengths differ".into(),
            ));
        }
        let mut tokens = Vec::new();
        for (i, (tok, maybe_lp)) in lp.tokens.iter().zip(lp.token_logprobs.iter()).enumerate() {
            // Positions without a conditional (the first token) carry null.
            let Some(mut logprob) = *maybe_lp else {
                continue;
            };
            if logprob > 0.0 {
                if logprob <= 1e-6 {
                    logprob = 0.0;
                } else {
                    return Err(ScoreError::Protocol(format!(
                        "token {i}: positive logprob {logprob}"
                    )));
                }
            }
            let top = lp
                .top_logprobs
                .as_ref()
                .and_then(|v| v.get(i))
                .and_then(|m| m.as_ref());
            let top_dist = top.map(|m| {
                let mut dist: Vec<(String, f64)> =
                    m.iter().map(|(t, l)| (t.clone(), l.min(0.0))).collect();
                dist.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
                dist
            });
            let server_rank = lp
                .token_ranks
                .as_ref()
                .and_then(|v| v.get(i))
                .and_then(|r| *r);
            let (rank, rank_approximate) = match server_rank {
                Some(r) if r >= 1 => (r, false),
                _ => match &top_dist {
                    Some(dist) => match dist.iter().find(|(t, _)| t == tok) {
                        Some((_, listed)) => {
                            let stricter =
                                dist.iter().filter(|(_, l)| *l > listed + 1e-12).count();
                            (stricter as u32 + 1, false)
                        }
                        None => (self.config.top_k + 1, true),
                    },
                    None => {
                        return Err(ScoreError::Protocol(format!(
                            "token {i}: no rank and no top_logprobs to reconstruct one"
                        )));
                    }
                },
            };
            tokens.push(TokenScore {
                token_text: tok.clone(),
                logprob,
                rank,
                rank_approximate,
                top_dist,
            });
        }
        if tokens.is_empty() {
            return Err(ScoreError::Protocol(
                "response contained no scored positions".into(),
            ));
        }
        Ok(SequenceScore {
            model_id: self.config.model_id.clone(),
            tokens,
            full_vocab: false,
        })
    }
}

enum SendFailure {
    Retryable(ScoreError),
    Fatal(ScoreError),
}

impl ScoreBackend for HttpScoreBackend {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn top_k(&self) -> u32 {
        self.config.top_k
    }

    fn fetch(&self, text: &str) -> Result<SequenceScore, ScoreError> {
        let token = self.auth_token()?;
        let mut last = None;
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(backoff_delay(attempt));
            }
            match self.send_once(text, token.as_deref()) {
                Ok(seq) => return Ok(seq),
                Err(SendFailure::Fatal(e)) => return Err(e),
                Err(SendFailure::Retryable(e)) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| ScoreError::Transport("no attempts made".into())))
    }
}

/// Exponential backoff: 150ms doubling per attempt.
pub(crate) fn backoff_delay(attempt: u32) -> Duration {
    Duration::from_millis(150u64.saturating_mul(1 << attempt.min(6)))
}
