//! Cached single judgments and checkpointed batch runs.
//!
//! Verdicts are cached per request digest, and a batch appends every fresh
//! verdict to a checkpoint file (newline-delimited, deduplicated on read),
//! so an interrupted batch resumes without re-querying anything already
//! answered. Workers run under a bounded pool; output order matches input
//! order; only auth failures abort a whole batch.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::ChatBackend;
use super::{build_prompt, parse_verdict, JudgeError, JudgeRequest, MessageSequence, Verdict};
use crate::eval::Label;
use crate::judge::{PromptKind, VerdictLabel};

/// Digest identifying one judgment: model plus full prompt content
/// (including image bytes).
pub fn request_digest(model_id: &str, messages: &MessageSequence) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(messages.digest().as_bytes());
    hex::encode(hasher.finalize())
}

fn cache_path(cache_dir: &Path, digest: &str) -> PathBuf {
    cache_dir.join(format!("{digest}.json"))
}

fn complete_uncached(
    messages: &MessageSequence,
    digest: &str,
    backend: &dyn ChatBackend,
) -> Result<Verdict, JudgeError> {
    let started = Instant::now();
    let raw = backend.complete(messages)?;
    let latency_ms = started.elapsed().as_millis() as u64;
    Ok(Verdict {
        request_digest: digest.to_string(),
        parsed: parse_verdict(&raw),
        raw_response: raw,
        model_id: backend.model_id().to_string(),
        latency_ms,
    })
}

fn complete_request(
    messages: &MessageSequence,
    digest: &str,
    backend: &dyn ChatBackend,
    cache_dir: Option<&Path>,
) -> Result<Verdict, JudgeError> {
    if let Some(dir) = cache_dir {
        if let Ok(bytes) = std::fs::read(cache_path(dir, digest)) {
            if let Ok(verdict) = serde_json::from_slice::<Verdict>(&bytes) {
                return Ok(verdict);
            }
        }
    }
    let verdict = complete_uncached(messages, digest, backend)?;
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir)?;
        let path = cache_path(dir, digest);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(&verdict).expect("serializable"))?;
        std::fs::rename(&tmp, &path)?;
    }
    Ok(verdict)
}

/// Judge one poem: build the prompt, consult the verdict cache, otherwise
/// call the backend and parse the answer.
pub fn judge_poem(
    request: &JudgeRequest,
    backend: &dyn ChatBackend,
    media_root: &Path,
    cache_dir: Option<&Path>,
) -> Result<Verdict, JudgeError> {
    let messages = build_prompt(request, media_root)?;
    let digest = request_digest(backend.model_id(), &messages);
    complete_request(&messages, &digest, backend, cache_dir)
}

/// Options for a batch run.
#[derive(Clone, Debug)]
pub struct BatchOptions {
    pub media_root: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    pub parallelism: usize,
}

impl BatchOptions {
    pub fn new(media_root: impl Into<PathBuf>) -> BatchOptions {
        BatchOptions {
            media_root: media_root.into(),
            cache_dir: None,
            checkpoint_path: None,
            parallelism: 1,
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn with_checkpoint(mut self, path: impl Into<PathBuf>) -> Self {
        self.checkpoint_path = Some(path.into());
        self
    }

    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.parallelism = n.max(1);
        self
    }
}

fn load_checkpoint(path: &Path) -> HashMap<String, Verdict> {
    let mut known = HashMap::new();
    if let Ok(content) = std::fs::read_to_string(path) {
        for line in content.lines() {
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(verdict) = serde_json::from_str::<Verdict>(line) {
                known.insert(verdict.request_digest.clone(), verdict);
            }
        }
    }
    known
}

/// Judge a batch with at most `parallelism` requests in flight. Returns
/// one result per request, in input order. Items already present in the
/// checkpoint or verdict cache cost no backend call; an auth error aborts
/// the remaining items.
pub fn run_judge_batch(
    requests: &[JudgeRequest],
    backend: &dyn ChatBackend,
    opts: &BatchOptions,
) -> Vec<Result<Verdict, JudgeError>> {
    let known = opts
        .checkpoint_path
        .as_deref()
        .map(load_checkpoint)
        .unwrap_or_default();
    let checkpoint = Mutex::new(opts.checkpoint_path.as_deref().map(|p| {
        if let Some(parent) = p.parent() {
            let _ = std::fs::create_dir_all(parent);
        }
        std::fs::OpenOptions::new().create(true).append(true).open(p)
    }));

    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let results: Vec<Mutex<Option<Result<Verdict, JudgeError>>>> =
        requests.iter().map(|_| Mutex::new(None)).collect();

    let process = |request: &JudgeRequest| -> Result<Verdict, JudgeError> {
        let messages = build_prompt(request, &opts.media_root)?;
        let digest = request_digest(backend.model_id(), &messages);
        if let Some(verdict) = known.get(&digest) {
            return Ok(verdict.clone());
        }
        let verdict = complete_request(&messages, &digest, backend, opts.cache_dir.as_deref())?;
        let mut guard = checkpoint.lock().expect("checkpoint lock");
        if let Some(Ok(file)) = guard.as_mut() {
            let line = serde_json::to_string(&verdict).expect("serializable");
            let _ = writeln!(file, "{line}");
            let _ = file.flush();
        }
        Ok(verdict)
    };

    std::thread::scope(|scope| {
        for _ in 0..opts.parallelism.max(1).min(requests.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= requests.len() {
                    break;
                }
                let outcome = if abort.load(Ordering::SeqCst) {
                    Err(JudgeError::Aborted)
                } else {
                    process(&requests[i])
                };
                if outcome.as_ref().is_err_and(|e| e.is_fatal()) {
                    abort.store(true, Ordering::SeqCst);
                }
                *results[i].lock().expect("result slot") = Some(outcome);
            });
        }
    });

    results
        .into_iter()
        .map(|slot| slot.into_inner().expect("result slot").expect("slot filled"))
        .collect()
}

/// One line of the append-only verdict log written by judge runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerdictLogRecord {
    pub request_digest: String,
    pub kind: PromptKind,
    pub poem_id: String,
    pub gold: Option<Label>,
    pub parsed: VerdictLabel,
    pub raw_response_digest: String,
    pub timestamp_ms: u64,
}

impl VerdictLogRecord {
    pub fn new(
        verdict: &Verdict,
        kind: PromptKind,
        poem_id: impl Into<String>,
        gold: Option<Label>,
    ) -> VerdictLogRecord {
        let mut hasher = Sha256::new();
        hasher.update(verdict.raw_response.as_bytes());
        let timestamp_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        VerdictLogRecord {
            request_digest: verdict.request_digest.clone(),
            kind,
            poem_id: poem_id.into(),
            gold,
            parsed: verdict.parsed,
            raw_response_digest: hex::encode(hasher.finalize()),
            timestamp_ms,
        }
    }
}
