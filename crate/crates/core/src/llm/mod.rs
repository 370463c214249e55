//! Provider-agnostic chat completion with retries, a content-addressed
//! response cache, and deterministic mock providers for testing.

pub mod cache;
pub mod http;
pub mod mock;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("authentication error: {message}")]
    Auth { message: String },
    #[error("rate limited: {message}")]
    RateLimited { message: String },
    #[error("transport failure: {message}")]
    Transport { message: String },
    #[error("provider-reported content error: {message}")]
    Content { message: String },
    #[error("invalid request: {message}")]
    InvalidRequest { message: String },
    #[error("cache error on {path}: {source}")]
    Cache {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scripted mock exhausted after {calls} calls")]
    ScriptExhausted { calls: usize },
}

impl LlmError {
    /// Transient errors are retried with backoff; the rest surface at once.
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::RateLimited { .. } | LlmError::Transport { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub provider: String,
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        let invalid = |message: &str| LlmError::InvalidRequest {
            message: message.to_string(),
        };
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err(invalid("at least one user message required"));
        }
        if self.messages.iter().any(|m| m.content.is_empty()) {
            return Err(invalid("message content must be non-empty"));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(invalid("temperature must be a finite value >= 0"));
        }
        Ok(())
    }

    /// Canonical serialization: keys in sorted order, exact strings. This
    /// string is what the cache key hashes, so it must never depend on
    /// serializer configuration.
    pub fn canonical_json(&self) -> String {
        use std::fmt::Write;
        let js = |s: &str| serde_json::to_string(s).expect("string serialization");
        let mut out = String::new();
        out.push_str("{\"max_output_tokens\":");
        match self.max_output_tokens {
            Some(m) => write!(out, "{m}").unwrap(),
            None => out.push_str("null"),
        }
        out.push_str(",\"messages\":[");
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{{\"content\":{},\"role\":{}}}", js(&m.content), js(m.role.as_str()))
                .unwrap();
        }
        out.push_str("],\"model\":");
        out.push_str(&js(&self.model));
        out.push_str(",\"provider\":");
        out.push_str(&js(&self.provider));
        out.push_str(",\"temperature\":");
        out.push_str(&serde_json::to_string(&self.temperature).expect("finite temperature"));
        out.push('}');
        out
    }

    pub fn cache_key(&self) -> CacheKey {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        CacheKey(format!("{:x}", hasher.finalize()))
    }
}

/// SHA-256 digest (64 hex chars) of a request's canonical serialization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey(pub String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    /// Provider text verbatim; empty on model refusal, never hidden.
    pub text: String,
    pub usage: Option<TokenUsage>,
    pub cached: bool,
    pub provider_latency_ms: Option<u64>,
}

/// One displayed candidate, in prompt order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplayedDoc {
    pub doc_id: String,
    pub first_stage_rank: usize,
}

/// Per-call context the reranker supplies alongside the request. HTTP
/// providers ignore it; mock providers use it to answer deterministically
/// for the active query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallContext {
    pub query_id: String,
    pub displayed: Vec<DisplayedDoc>,
}

impl CallContext {
    pub fn for_query(query_id: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            displayed: Vec::new(),
        }
    }
}

/// A single completion attempt against some backend.
pub trait ChatProvider: Send + Sync {
    fn send_once(&self, request: &ChatRequest, ctx: &CallContext) -> Result<ChatResponse, LlmError>;
}

/// Exponential backoff: base * factor^(attempt-1) before each retry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base: Duration::from_secs(1),
            factor: 2,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Zero-delay policy for tests.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            base: Duration::from_millis(0),
            factor: 2,
            max_attempts,
        }
    }
}

/// Completion client: a provider plus its retry policy.
#[derive(Clone)]
pub struct LlmClient {
    provider: Arc<dyn ChatProvider>,
    retry: RetryPolicy,
}

impl LlmClient {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Self {
            provider,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Complete a request, retrying transient failures with exponential
    /// backoff before surfacing the error.
    pub fn complete(&self, request: &ChatRequest, ctx: &CallContext) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let mut attempt = 1u32;
        loop {
            match self.provider.send_once(request, ctx) {
                Ok(response) => return Ok(response),
                Err(err) if err.is_transient() && attempt < self.retry.max_attempts => {
                    let delay = self.retry.base * self.retry.factor.saturating_pow(attempt - 1);
                    eprintln!(
                        "insertrank: transient provider error on attempt {attempt}/{}: {err}; retrying in {delay:?}",
                        self.retry.max_attempts
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(err) => return Err(err),
            }
        }
    }

    /// Complete through the file cache: a key hit returns the stored
    /// response without touching the provider.
    pub fn cached_complete(
        &self,
        cache_dir: &std::path::Path,
        request: &ChatRequest,
        ctx: &CallContext,
    ) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let key = request.cache_key();
        if let Some(response) = cache::lookup(cache_dir, &key) {
            return Ok(response);
        }
        let response = self.complete(request, ctx)?;
        cache::store(cache_dir, &key, request, &response)?;
        Ok(response)
    }
}
