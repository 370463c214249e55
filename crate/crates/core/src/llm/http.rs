//! OpenAI-compatible HTTP chat-completion provider.
//!
//! Providers are described by configuration (base URL, auth header, field
//! names), so adding one needs no code changes. Credentials come from
//! `INSERTRANK_API_KEY_<PROVIDER>` environment variables.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};

use super::{CallContext, ChatProvider, ChatRequest, ChatResponse, LlmError, TokenUsage};

fn default_chat_path() -> String {
    "/chat/completions".to_string()
}
fn default_auth_header() -> String {
    "Authorization".to_string()
}
fn default_auth_prefix() -> String {
    "Bearer ".to_string()
}
fn default_max_tokens_field() -> String {
    "max_tokens".to_string()
}

/// Wire description of one OpenAI-compatible provider.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ProviderConfig {
    pub name: String,
    pub base_url: String,
    #[serde(default = "default_chat_path")]
    pub chat_path: String,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_prefix")]
    pub auth_prefix: String,
    #[serde(default = "default_max_tokens_field")]
    pub max_tokens_field: String,
}

impl ProviderConfig {
    pub fn openai_compatible(name: &str, base_url: &str) -> Self {
        Self {
            name: name.to_string(),
            base_url: base_url.to_string(),
            chat_path: default_chat_path(),
            auth_header: default_auth_header(),
            auth_prefix: default_auth_prefix(),
            max_tokens_field: default_max_tokens_field(),
        }
    }
}

/// Name-indexed provider configurations.
#[derive(Debug, Clone, Default)]
pub struct ProviderRegistry {
    providers: BTreeMap<String, ProviderConfig>,
}

impl ProviderRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry pre-populated with well-known OpenAI-compatible endpoints.
    pub fn with_defaults() -> Self {
        let mut registry = Self::default();
        registry.insert(ProviderConfig::openai_compatible(
            "openai",
            "https://api.openai.com/v1",
        ));
        registry.insert(ProviderConfig::openai_compatible(
            "deepseek",
            "https://api.deepseek.com/v1",
        ));
        registry.insert(ProviderConfig::openai_compatible(
            "gemini",
            "https://generativelanguage.googleapis.com/v1beta/openai",
        ));
        registry
    }

    pub fn insert(&mut self, config: ProviderConfig) {
        self.providers.insert(config.name.clone(), config);
    }

    pub fn get(&self, name: &str) -> Option<&ProviderConfig> {
        self.providers.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.providers.keys().map(|s| s.as_str())
    }
}

/// Environment variable holding the credential for a provider name.
pub fn api_key_var(provider: &str) -> String {
    let upper: String = provider
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_uppercase()
            } else {
                '_'
            }
        })
        .collect();
    format!("INSERTRANK_API_KEY_{upper}")
}

pub struct HttpProvider {
    config: ProviderConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig, api_key: String) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(300))
            .build();
        Self {
            config,
            api_key,
            agent,
        }
    }

    /// Build a provider, resolving the credential from the environment.
    pub fn from_env(config: ProviderConfig) -> Result<Self, LlmError> {
        let var = api_key_var(&config.name);
        let api_key = std::env::var(&var).map_err(|_| LlmError::Auth {
            message: format!("missing credential environment variable {var}"),
        })?;
        Ok(Self::new(config, api_key))
    }

    fn request_body(&self, request: &ChatRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        let mut body = json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
        });
        if let Some(max) = request.max_output_tokens {
            body[self.config.max_tokens_field.as_str()] = json!(max);
        }
        body
    }
}

/// Pull text and usage out of an OpenAI-schema chat completion body.
pub fn parse_completion(body: &Value) -> Result<(String, Option<TokenUsage>), LlmError> {
    let message = body
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .ok_or_else(|| LlmError::Content {
            message: format!("malformed provider response: missing choices[0].message in {body}"),
        })?;
    // Null content means a refusal; surface it as an empty string.
    let text = message
        .get("content")
        .and_then(|c| c.as_str())
        .unwrap_or("")
        .to_string();
    let usage = body.get("usage").and_then(|u| {
        Some(TokenUsage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens")?.as_u64()?,
        })
    });
    Ok((text, usage))
}

impl ChatProvider for HttpProvider {
    fn send_once(&self, request: &ChatRequest, _ctx: &CallContext) -> Result<ChatResponse, LlmError> {
        let url = format!("{}{}", self.config.base_url, self.config.chat_path);
        let auth_value = format!("{}{}", self.config.auth_prefix, self.api_key);
        let started = Instant::now();

        let result = self
            .agent
            .post(&url)
            .set(&self.config.auth_header, &auth_value)
            .send_json(self.request_body(request));

        match result {
            Ok(response) => {
                let latency = started.elapsed().as_millis() as u64;
                let body: Value = response.into_json().map_err(|e| LlmError::Content {
                    message: format!("provider returned non-JSON body: {e}"),
                })?;
                let (text, usage) = parse_completion(&body)?;
                Ok(ChatResponse {
                    text,
                    usage,
                    cached: false,
                    provider_latency_ms: Some(latency),
                })
            }
            Err(ureq::Error::Status(code, response)) => {
                let body = response.into_string().unwrap_or_default();
                let message = format!("{} returned HTTP {code}: {body}", self.config.name);
                match code {
                    401 | 403 => Err(LlmError::Auth { message }),
                    429 => Err(LlmError::RateLimited { message }),
                    500..=599 => Err(LlmError::Transport { message }),
                    _ => Err(LlmError::Content { message }),
                }
            }
            Err(ureq::Error::Transport(transport)) => Err(LlmError::Transport {
                message: transport.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ChatMessage, LlmClient, RetryPolicy};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn request() -> ChatRequest {
        ChatRequest {
            provider: "local".into(),
            model: "test-model".into(),
            messages: vec![ChatMessage::user("ping")],
            temperature: 0.0,
            max_output_tokens: Some(16),
        }
    }

    /// Minimal HTTP/1.1 server replaying canned responses, one per connection.
    fn serve(responses: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut content_length = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(rest) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        content_length = rest.trim().parse().unwrap();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut payload = vec![0u8; content_length];
                reader.read_exact(&mut payload).unwrap();
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let mut stream = reader.into_inner();
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}")
    }

    fn ok_body(text: &str) -> String {
        json!({
            "choices": [{"message": {"role": "assistant", "content": text}}],
            "usage": {"prompt_tokens": 7, "completion_tokens": 3},
        })
        .to_string()
    }

    #[test]
    fn completes_against_openai_schema() {
        let base = serve(vec![(200, ok_body("pong"))]);
        let provider = HttpProvider::new(
            ProviderConfig::openai_compatible("local", &base),
            "k".into(),
        );
        let resp = provider.send_once(&request(), &CallContext::default()).unwrap();
        assert_eq!(resp.text, "pong");
        assert_eq!(
            resp.usage,
            Some(TokenUsage {
                prompt_tokens: 7,
                completion_tokens: 3
            })
        );
        assert!(!resp.cached);
    }

    #[test]
    fn retries_rate_limit_then_succeeds() {
        let base = serve(vec![
            (429, "{\"error\":\"slow down\"}".to_string()),
            (200, ok_body("finally")),
        ]);
        let provider = HttpProvider::new(
            ProviderConfig::openai_compatible("local", &base),
            "k".into(),
        );
        let client =
            LlmClient::new(std::sync::Arc::new(provider)).with_retry(RetryPolicy::immediate(5));
        let resp = client.complete(&request(), &CallContext::default()).unwrap();
        assert_eq!(resp.text, "finally");
    }

    #[test]
    fn auth_status_maps_to_auth_error() {
        let base = serve(vec![(401, "{\"error\":\"bad key\"}".to_string())]);
        let provider = HttpProvider::new(
            ProviderConfig::openai_compatible("local", &base),
            "k".into(),
        );
        let err = provider.send_once(&request(), &CallContext::default()).unwrap_err();
        assert!(matches!(err, LlmError::Auth { .. }), "{err}");
        assert!(err.to_string().contains("bad key"), "{err}");
    }

    #[test]
    fn missing_credential_names_variable() {
        let config = ProviderConfig::openai_compatible("nosuchprov", "http://127.0.0.1:1");
        let err = match HttpProvider::from_env(config) {
            Ok(_) => panic!("expected missing-credential error"),
            Err(err) => err,
        };
        assert!(
            err.to_string().contains("INSERTRANK_API_KEY_NOSUCHPROV"),
            "{err}"
        );
    }

    #[test]
    fn api_key_var_sanitizes_names() {
        assert_eq!(api_key_var("openai"), "INSERTRANK_API_KEY_OPENAI");
        assert_eq!(api_key_var("my-provider.v2"), "INSERTRANK_API_KEY_MY_PROVIDER_V2");
    }

    #[test]
    fn null_content_surfaces_as_empty_text() {
        let body = json!({"choices": [{"message": {"role": "assistant", "content": null}}]});
        let (text, usage) = parse_completion(&body).unwrap();
        assert_eq!(text, "");
        assert_eq!(usage, None);
    }

    #[test]
    fn registry_defaults_cover_known_providers() {
        let registry = ProviderRegistry::with_defaults();
        assert!(registry.get("openai").is_some());
        assert!(registry.get("deepseek").is_some());
        assert!(registry.get("gemini").is_some());
        assert!(registry.get("unknown").is_none());
    }
}
