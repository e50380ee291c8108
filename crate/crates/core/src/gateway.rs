//! Chat-completion and embedding backends behind one retrying, usage-logging gateway.
//!
//! Two backends ship: an OpenAI-compatible HTTP client (`messages` in, `usage` out) and
//! a deterministic stub whose output is a pure function of `(prompt, seed_hint)`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::types::Task;

pub const STUB_ENDPOINT: &str = "stub";
pub const STUB_EMBEDDING_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Base URL of an OpenAI-compatible API, or `stub`.
    pub endpoint: String,
    pub api_key_env: String,
    /// Prompt budget in tokens used by the context-budget checks.
    pub context_limit: usize,
}

impl ModelSpec {
    pub fn stub(model_id: &str) -> Self {
        ModelSpec {
            model_id: model_id.to_string(),
            temperature: 1.0,
            max_output_tokens: 4096,
            endpoint: STUB_ENDPOINT.to_string(),
            api_key_env: String::new(),
            context_limit: 128_000,
        }
    }

    pub fn is_stub(&self) -> bool {
        self.endpoint == STUB_ENDPOINT
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.model_id.is_empty() {
            return Err("model_id is empty".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(format!("temperature {} is not a finite non-negative number", self.temperature));
        }
        if self.max_output_tokens == 0 {
            return Err("max_output_tokens must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CallKind {
    Completion,
    Embedding,
    AuxParse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub instance_id: String,
    pub task: Option<Task>,
    pub run_index: Option<usize>,
    pub model_id: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Seconds.
    pub latency: f64,
    pub call_kind: CallKind,
    /// Token counts estimated as ceil(bytes / 4) because the backend reported none.
    #[serde(default)]
    pub approximate: bool,
    /// The attempt failed but consumed tokens.
    #[serde(default)]
    pub failed: bool,
}

/// Append-only, shareable sink of usage records.
#[derive(Debug, Clone, Default)]
pub struct UsageLog(Arc<Mutex<Vec<UsageRecord>>>);

impl UsageLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, record: UsageRecord) {
        self.0.lock().unwrap().push(record);
    }

    pub fn snapshot(&self) -> Vec<UsageRecord> {
        self.0.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.0.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Who is calling and why; copied into the usage record.
#[derive(Debug, Clone, PartialEq)]
pub struct CallContext {
    pub instance_id: String,
    pub task: Option<Task>,
    pub run_index: Option<usize>,
    pub kind: CallKind,
}

impl CallContext {
    pub fn new(instance_id: &str, task: Task, run_index: usize, kind: CallKind) -> Self {
        CallContext {
            instance_id: instance_id.to_string(),
            task: Some(task),
            run_index: Some(run_index),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: UsageRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
}

/// What a backend hands back for one chat call.
#[derive(Debug, Clone, PartialEq)]
pub struct RawReply {
    pub text: String,
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
    /// Backends may report their own latency (the stub reports zero).
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawEmbedding {
    pub values: Vec<f64>,
    pub input_tokens: Option<u64>,
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("transient failure: {reason}")]
    Transient {
        reason: String,
        /// `(input, output)` tokens consumed by the failed attempt, if reported.
        usage: Option<(u64, u64)>,
    },
    #[error("context length exceeded: {0}")]
    ContextLengthExceeded(String),
    #[error("request rejected: {0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempts: {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("context length exceeded: {0}")]
    ContextLengthExceeded(String),
    #[error("empty input")]
    EmptyInput,
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
}

pub trait Backend: Send + Sync {
    fn chat(&self, spec: &ModelSpec, prompt: &str, seed_hint: u64) -> Result<RawReply, BackendError>;
    fn embed(&self, spec: &ModelSpec, text: &str) -> Result<RawEmbedding, BackendError>;
}

/// ceil(bytes / 4).
pub fn approx_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

// ---------------------------------------------------------------- stub

/// Deterministic offline backend.
///
/// Without an override, a prompt that asks for a `SCORE:` block gets one, with the
/// score `hash mod 4` and the extra fields the prompt names; any other prompt gets the
/// bare digit. Overrides map [`StubBackend::key`] to canned text.
#[derive(Debug, Clone, Default)]
pub struct StubBackend {
    overrides: HashMap<String, String>,
}

impl StubBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_overrides(overrides: HashMap<String, String>) -> Self {
        StubBackend { overrides }
    }

    /// Load a JSON object `{ key: text }`.
    pub fn from_override_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let overrides: HashMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Self::with_overrides(overrides))
    }

    pub fn insert(&mut self, key: String, text: String) {
        self.overrides.insert(key, text);
    }

    /// Hex SHA-256 of the prompt bytes, a NUL, and the decimal seed hint.
    pub fn key(prompt: &str, seed_hint: u64) -> String {
        let mut h = Sha256::new();
        h.update(prompt.as_bytes());
        h.update([0u8]);
        h.update(seed_hint.to_string().as_bytes());
        hex::encode(h.finalize())
    }

    /// The score the stub emits for `(prompt, seed_hint)` when no override applies.
    pub fn default_score(prompt: &str, seed_hint: u64) -> u8 {
        let key = Self::key(prompt, seed_hint);
        (u64::from_str_radix(&key[..16], 16).unwrap() % 4) as u8
    }

    fn canned(prompt: &str, seed_hint: u64) -> String {
        let key = Self::key(prompt, seed_hint);
        let score = Self::default_score(prompt, seed_hint);
        if !prompt.contains("SCORE:") {
            return score.to_string();
        }
        let mut out = format!(
            "```\nSCORE: {score}\nRATIONALE: Stub assessment {}.\n",
            &key[..12]
        );
        if prompt.contains("CANDIDATE_SOLUTION") {
            let yes = u8::from_str_radix(&key[16..18], 16).unwrap() % 2 == 0;
            out.push_str(if yes { "CANDIDATE_SOLUTION: yes\n" } else { "CANDIDATE_SOLUTION: no\n" });
        }
        if prompt.contains("COUNTER_EXAMPLE") {
            if score > 0 {
                out.push_str(&format!("COUNTER_EXAMPLE: A patch variant {} passes the tests.\n", &key[18..24]));
            } else {
                out.push_str("COUNTER_EXAMPLE: none\n");
            }
        }
        out.push_str("```\n");
        out
    }
}

impl Backend for StubBackend {
    fn chat(&self, _spec: &ModelSpec, prompt: &str, seed_hint: u64) -> Result<RawReply, BackendError> {
        let text = match self.overrides.get(&Self::key(prompt, seed_hint)) {
            Some(t) => t.clone(),
            None => Self::canned(prompt, seed_hint),
        };
        Ok(RawReply { text, input_tokens: None, output_tokens: None, latency: Some(0.0) })
    }

    fn embed(&self, _spec: &ModelSpec, text: &str) -> Result<RawEmbedding, BackendError> {
        let digest = Sha256::digest(text.as_bytes());
        let values = digest
            .chunks(2)
            .take(STUB_EMBEDDING_DIM)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / u16::MAX as f64 * 2.0 - 1.0)
            .collect();
        Ok(RawEmbedding { values, input_tokens: None, latency: Some(0.0) })
    }
}

// ---------------------------------------------------------------- http

/// OpenAI-compatible `/chat/completions` and `/embeddings` client.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
}

impl Default for HttpBackend {
    fn default() -> Self {
        Self::new(Duration::from_secs(600))
    }
}

impl HttpBackend {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client");
        HttpBackend { client }
    }

    fn post(&self, spec: &ModelSpec, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = format!("{}/{}", spec.endpoint.trim_end_matches('/'), path);
        let mut req = self.client.post(&url).json(body);
        if !spec.api_key_env.is_empty() {
            if let Ok(key) = std::env::var(&spec.api_key_env) {
                req = req.bearer_auth(key);
            }
        }
        let resp = req.send().map_err(|e| BackendError::Transient { reason: e.to_string(), usage: None })?;
        let status = resp.status();
        let text = resp.text().unwrap_or_default();
        let parsed: Option<Value> = serde_json::from_str(&text).ok();
        if status.is_success() {
            return parsed.ok_or_else(|| BackendError::Transient {
                reason: "response body is not JSON".into(),
                usage: None,
            });
        }
        let usage = parsed.as_ref().and_then(usage_of);
        let lower = text.to_ascii_lowercase();
        if lower.contains("context_length_exceeded") || lower.contains("maximum context length") {
            return Err(BackendError::ContextLengthExceeded(text));
        }
        if status.as_u16() == 429 || status.is_server_error() || status.as_u16() == 408 {
            return Err(BackendError::Transient { reason: format!("HTTP {status}"), usage });
        }
        Err(BackendError::Fatal(format!("HTTP {status}: {text}")))
    }
}

fn usage_of(v: &Value) -> Option<(u64, u64)> {
    let u = v.get("usage")?;
    let input = u.get("prompt_tokens").and_then(Value::as_u64)?;
    let output = u.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0);
    Some((input, output))
}

impl Backend for HttpBackend {
    fn chat(&self, spec: &ModelSpec, prompt: &str, seed_hint: u64) -> Result<RawReply, BackendError> {
        let body = json!({
            "model": spec.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": spec.temperature,
            "max_tokens": spec.max_output_tokens,
            "seed": seed_hint,
        });
        let v = self.post(spec, "chat/completions", &body)?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::Transient { reason: "response has no message content".into(), usage: usage_of(&v) })?
            .to_string();
        let usage = usage_of(&v);
        Ok(RawReply {
            text,
            input_tokens: usage.map(|u| u.0),
            output_tokens: usage.map(|u| u.1),
            latency: None,
        })
    }

    fn embed(&self, spec: &ModelSpec, text: &str) -> Result<RawEmbedding, BackendError> {
        let body = json!({"model": spec.model_id, "input": text});
        let v = self.post(spec, "embeddings", &body)?;
        let values = v
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Fatal("response has no embedding".into()))?
            .iter()
            .map(|x| x.as_f64().unwrap_or(f64::NAN))
            .collect();
        Ok(RawEmbedding { values, input_tokens: usage_of(&v).map(|u| u.0), latency: None })
    }
}

// ---------------------------------------------------------------- gateway

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub retries: u32,
    /// Delay before the first retry; doubles each time.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { retries: 3, base_delay: Duration::from_secs(1) }
    }
}

#[derive(Clone)]
pub struct Gateway {
    stub: Arc<dyn Backend>,
    remote: Arc<dyn Backend>,
    retry: RetryPolicy,
    log: UsageLog,
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new(StubBackend::new())
    }
}

impl Gateway {
    pub fn new(stub: StubBackend) -> Self {
        Gateway {
            stub: Arc::new(stub),
            remote: Arc::new(HttpBackend::default()),
            retry: RetryPolicy::default(),
            log: UsageLog::new(),
        }
    }

    /// Replace the backend used for non-stub endpoints.
    pub fn with_remote(mut self, backend: Arc<dyn Backend>) -> Self {
        self.remote = backend;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Same backends, fresh log.
    pub fn with_log(&self, log: UsageLog) -> Self {
        Gateway { log, ..self.clone() }
    }

    pub fn log(&self) -> &UsageLog {
        &self.log
    }

    fn backend(&self, spec: &ModelSpec) -> &dyn Backend {
        if spec.is_stub() {
            self.stub.as_ref()
        } else {
            self.remote.as_ref()
        }
    }

    fn with_retries<T>(
        &self,
        spec: &ModelSpec,
        ctx: &CallContext,
        mut call: impl FnMut() -> Result<T, BackendError>,
    ) -> Result<(T, f64), GatewayError> {
        let attempts = self.retry.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt - 1));
            }
            let started = Instant::now();
            match call() {
                Ok(v) => return Ok((v, started.elapsed().as_secs_f64())),
                Err(BackendError::Transient { reason, usage }) => {
                    if let Some((input, output)) = usage {
                        self.log.push(UsageRecord {
                            instance_id: ctx.instance_id.clone(),
                            task: ctx.task,
                            run_index: ctx.run_index,
                            model_id: spec.model_id.clone(),
                            input_tokens: input,
                            output_tokens: output,
                            latency: started.elapsed().as_secs_f64(),
                            call_kind: ctx.kind,
                            approximate: false,
                            failed: true,
                        });
                    }
                    log::warn!("{} attempt {}/{attempts} failed: {reason}", spec.model_id, attempt + 1);
                    last = reason;
                }
                Err(BackendError::ContextLengthExceeded(m)) => {
                    return Err(GatewayError::ContextLengthExceeded(m))
                }
                Err(BackendError::Fatal(m)) => return Err(GatewayError::Rejected(m)),
            }
        }
        Err(GatewayError::BackendUnavailable { attempts, last })
    }

    pub fn complete(
        &self,
        spec: &ModelSpec,
        prompt: &str,
        seed_hint: u64,
        ctx: &CallContext,
    ) -> Result<Completion, GatewayError> {
        if prompt.is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let backend = self.backend(spec);
        let (reply, measured) = self.with_retries(spec, ctx, || backend.chat(spec, prompt, seed_hint))?;
        let approximate = reply.input_tokens.is_none() || reply.output_tokens.is_none();
        let usage = UsageRecord {
            instance_id: ctx.instance_id.clone(),
            task: ctx.task,
            run_index: ctx.run_index,
            model_id: spec.model_id.clone(),
            input_tokens: reply.input_tokens.unwrap_or_else(|| approx_tokens(prompt)),
            output_tokens: reply.output_tokens.unwrap_or_else(|| approx_tokens(&reply.text)),
            latency: reply.latency.unwrap_or(measured),
            call_kind: ctx.kind,
            approximate,
            failed: false,
        };
        self.log.push(usage.clone());
        Ok(Completion { text: reply.text, usage })
    }

    pub fn embed(&self, spec: &ModelSpec, text: &str, ctx: &CallContext) -> Result<EmbeddingVector, GatewayError> {
        if text.is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let backend = self.backend(spec);
        let (raw, measured) = self.with_retries(spec, ctx, || backend.embed(spec, text))?;
        if raw.values.is_empty() || raw.values.iter().any(|v| !v.is_finite()) {
            return Err(GatewayError::InvalidEmbedding(format!("{} values, non-finite present", raw.values.len())));
        }
        self.log.push(UsageRecord {
            instance_id: ctx.instance_id.clone(),
            task: ctx.task,
            run_index: ctx.run_index,
            model_id: spec.model_id.clone(),
            input_tokens: raw.input_tokens.unwrap_or_else(|| approx_tokens(text)),
            output_tokens: 0,
            latency: raw.latency.unwrap_or(measured),
            call_kind: CallKind::Embedding,
            approximate: raw.input_tokens.is_none(),
            failed: false,
        });
        Ok(EmbeddingVector { values: raw.values, model_id: spec.model_id.clone() })
    }
}

// ---------------------------------------------------------------- summaries

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsageSummary {
    pub input_tokens: f64,
    pub output_tokens: f64,
    pub latency: f64,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no usage records{}", .0.map(|t| format!(" for task {t}")).unwrap_or_default())]
pub struct EmptyLog(pub Option<Task>);

/// Median of a non-empty slice; mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Medians over per-instance totals. `task = None` pools every task of an instance.
pub fn usage_summary(log: &[UsageRecord], task: Option<Task>) -> Result<UsageSummary, EmptyLog> {
    let mut per_instance: HashMap<&str, (u64, u64, f64)> = HashMap::new();
    for r in log.iter().filter(|r| task.is_none() || r.task == task) {
        let e = per_instance.entry(r.instance_id.as_str()).or_default();
        e.0 += r.input_tokens;
        e.1 += r.output_tokens;
        e.2 += r.latency;
    }
    if per_instance.is_empty() {
        return Err(EmptyLog(task));
    }
    let col = |f: fn(&(u64, u64, f64)) -> f64| -> f64 {
        median(&per_instance.values().map(f).collect::<Vec<_>>()).unwrap()
    };
    Ok(UsageSummary {
        input_tokens: col(|t| t.0 as f64),
        output_tokens: col(|t| t.1 as f64),
        latency: col(|t| t.2),
        instances: per_instance.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> CallContext {
        CallContext::new("i1", Task::Ica, 0, CallKind::Completion)
    }

    #[test]
    fn stub_is_deterministic() {
        let gw = Gateway::default();
        let spec = ModelSpec::stub("stub");
        let a = gw.complete(&spec, "Reply with SCORE: please", 7, &ctx()).unwrap();
        let b = gw.complete(&spec, "Reply with SCORE: please", 7, &ctx()).unwrap();
        assert_eq!(a, b);
        assert!(a.text.contains(&format!("SCORE: {}", StubBackend::default_score("Reply with SCORE: please", 7))));
        assert_eq!(gw.log().len(), 2);
        assert!(a.usage.approximate);
        assert_eq!(a.usage.input_tokens, approx_tokens("Reply with SCORE: please"));
    }

    #[test]
    fn stub_override() {
        let mut stub = StubBackend::new();
        stub.insert(StubBackend::key("p", 1), "canned".into());
        let gw = Gateway::new(stub);
        let spec = ModelSpec::stub("stub");
        assert_eq!(gw.complete(&spec, "p", 1, &ctx()).unwrap().text, "canned");
        assert_ne!(gw.complete(&spec, "p", 2, &ctx()).unwrap().text, "canned");
    }

    #[test]
    fn empty_prompt_rejected() {
        let gw = Gateway::default();
        assert_eq!(gw.complete(&ModelSpec::stub("s"), "", 0, &ctx()), Err(GatewayError::EmptyInput));
        assert!(gw.log().is_empty());
    }

    #[test]
    fn stub_embedding() {
        let gw = Gateway::default();
        let spec = ModelSpec::stub("emb");
        let c = CallContext { instance_id: "x".into(), task: None, run_index: None, kind: CallKind::Embedding };
        let a = gw.embed(&spec, "hello", &c).unwrap();
        let b = gw.embed(&spec, "hello", &c).unwrap();
        assert_eq!(a.values.len(), STUB_EMBEDDING_DIM);
        assert_eq!(a, b);
        assert!(a.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(gw.embed(&spec, "", &c), Err(GatewayError::EmptyInput));
        assert!(gw.log().snapshot().iter().all(|r| r.call_kind == CallKind::Embedding));
    }

    struct Flaky {
        failures: Mutex<u32>,
        usage_on_failure: bool,
    }

    impl Backend for Flaky {
        fn chat(&self, _: &ModelSpec, _: &str, _: u64) -> Result<RawReply, BackendError> {
            let mut f = self.failures.lock().unwrap();
            if *f > 0 {
                *f -= 1;
                return Err(BackendError::Transient {
                    reason: "503".into(),
                    usage: self.usage_on_failure.then_some((10, 5)),
                });
            }
            Ok(RawReply { text: "ok".into(), input_tokens: Some(3), output_tokens: Some(1), latency: None })
        }
        fn embed(&self, _: &ModelSpec, _: &str) -> Result<RawEmbedding, BackendError> {
            Err(BackendError::ContextLengthExceeded("too long".into()))
        }
    }

    fn remote_spec() -> ModelSpec {
        ModelSpec { endpoint: "http://unused".into(), ..ModelSpec::stub("remote") }
    }

    #[test]
    fn retries_then_succeeds_without_duplicate_usage() {
        let gw = Gateway::default()
            .with_remote(Arc::new(Flaky { failures: Mutex::new(2), usage_on_failure: false }))
            .with_retry(RetryPolicy { retries: 3, base_delay: Duration::ZERO });
        let c = gw.complete(&remote_spec(), "p", 0, &ctx()).unwrap();
        assert_eq!(c.text, "ok");
        assert!(!c.usage.approximate);
        assert_eq!(gw.log().len(), 1);
    }

    #[test]
    fn failed_attempts_with_usage_are_marked() {
        let gw = Gateway::default()
            .with_remote(Arc::new(Flaky { failures: Mutex::new(5), usage_on_failure: true }))
            .with_retry(RetryPolicy { retries: 3, base_delay: Duration::ZERO });
        let err = gw.complete(&remote_spec(), "p", 0, &ctx()).unwrap_err();
        assert!(matches!(err, GatewayError::BackendUnavailable { attempts: 4, .. }));
        let log = gw.log().snapshot();
        assert_eq!(log.len(), 4);
        assert!(log.iter().all(|r| r.failed));
    }

    #[test]
    fn context_length_is_not_retried() {
        let gw = Gateway::default()
            .with_remote(Arc::new(Flaky { failures: Mutex::new(0), usage_on_failure: false }))
            .with_retry(RetryPolicy { retries: 3, base_delay: Duration::from_secs(60) });
        let c = CallContext { instance_id: "x".into(), task: None, run_index: None, kind: CallKind::Embedding };
        assert!(matches!(gw.embed(&remote_spec(), "t", &c), Err(GatewayError::ContextLengthExceeded(_))));
    }

    fn rec(id: &str, input: u64, output: u64, task: Task) -> UsageRecord {
        UsageRecord {
            instance_id: id.into(),
            task: Some(task),
            run_index: Some(0),
            model_id: "m".into(),
            input_tokens: input,
            output_tokens: output,
            latency: 1.0,
            call_kind: CallKind::Completion,
            approximate: false,
            failed: false,
        }
    }

    #[test]
    fn summary_medians() {
        let log = vec![
            rec("a", 400, 1, Task::Ica),
            rec("b", 475, 1, Task::Ica),
            rec("c", 300, 1, Task::Ica),
            rec("c", 300, 1, Task::Ica),
        ];
        let s = usage_summary(&log, Some(Task::Ica)).unwrap();
        assert_eq!(s.input_tokens, 475.0);
        assert_eq!(s.latency, 1.0);
        let two = vec![rec("a", 100, 0, Task::Tca), rec("b", 200, 0, Task::Tca)];
        assert_eq!(usage_summary(&two, Some(Task::Tca)).unwrap().input_tokens, 150.0);
        assert_eq!(usage_summary(&two, Some(Task::Ica)), Err(EmptyLog(Some(Task::Ica))));
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::stub("m").validate().is_ok());
        assert!(ModelSpec { temperature: f64::NAN, ..ModelSpec::stub("m") }.validate().is_err());
        assert!(ModelSpec::stub("").validate().is_err());
    }
}
