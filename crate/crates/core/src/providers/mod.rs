//! Pluggable model backends.
//!
//! A [`Provider`] turns an assembled message list into a [`ChatResponse`].
//! HTTP backends differ only in request shape, endpoint path and response
//! parser; switching vendors is a matter of picking a different
//! [`ProviderKind`].

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{BarkError, Result};
use crate::types::{ChatResponse, Message, PromptParameters};

pub mod mock;
pub mod ollama;
pub mod openai;

pub use mock::{MockProvider, MockReply};

pub const OPENAI_BASE_URL: &str = "https://api.openai.com/v1";
pub const OLLAMA_BASE_URL: &str = "http://localhost:11434";
pub const ROUTER_BASE_URL: &str = "https://openrouter.ai/api/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[serde(alias = "openai")]
    OpenAICompatible,
    Ollama,
    Router,
    Mock,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::OpenAICompatible => "openai",
            ProviderKind::Ollama => "ollama",
            ProviderKind::Router => "router",
            ProviderKind::Mock => "mock",
        }
    }

    pub fn default_base_url(self) -> &'static str {
        match self {
            ProviderKind::OpenAICompatible => OPENAI_BASE_URL,
            ProviderKind::Ollama => OLLAMA_BASE_URL,
            ProviderKind::Router => ROUTER_BASE_URL,
            ProviderKind::Mock => "mock://",
        }
    }

    /// Path appended to the base URL.
    pub fn endpoint_path(self) -> &'static str {
        match self {
            ProviderKind::OpenAICompatible | ProviderKind::Router => "/chat/completions",
            ProviderKind::Ollama => "/api/chat",
            ProviderKind::Mock => "",
        }
    }

    pub fn build_request(self, messages: &[Message], params: &PromptParameters) -> Result<Value> {
        match self {
            ProviderKind::Ollama => ollama::build_request(messages, params),
            _ => openai::build_request(messages, params),
        }
    }

    pub fn parse_response(self, body: &str) -> Result<ChatResponse> {
        match self {
            ProviderKind::Ollama => ollama::parse_response(body),
            _ => openai::parse_response(body),
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProviderKind {
    type Err = BarkError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "openai" | "openai_compatible" | "openai-compatible" | "gemini" => {
                Ok(ProviderKind::OpenAICompatible)
            }
            "ollama" => Ok(ProviderKind::Ollama),
            "router" | "openrouter" => Ok(ProviderKind::Router),
            "mock" => Ok(ProviderKind::Mock),
            other => Err(BarkError::invalid(format!("unknown provider {other:?}"))),
        }
    }
}

/// An API key. Never printed by `Debug`.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret([REDACTED])")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 1,
            backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            backoff: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub base_url: String,
    pub api_key: Option<Secret>,
    pub default_model: String,
    pub timeout: Duration,
    pub extra_headers: IndexMap<String, String>,
    pub retry: RetryPolicy,
}

impl ProviderConfig {
    pub fn new(base_url: impl Into<String>, default_model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            default_model: default_model.into(),
            timeout: Duration::from_secs(60),
            extra_headers: IndexMap::new(),
            retry: RetryPolicy::default(),
        }
    }

    /// Config pointing at the kind's well-known endpoint.
    pub fn for_kind(kind: ProviderKind, default_model: impl Into<String>) -> Self {
        Self::new(kind.default_base_url(), default_model)
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(Secret::new(key));
        self
    }

    pub fn with_header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.extra_headers.insert(name.into(), value.into());
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let scheme_ok = ["http://", "https://"].iter().any(|scheme| {
            self.base_url
                .get(..scheme.len())
                .is_some_and(|p| p.eq_ignore_ascii_case(scheme))
                && self.base_url.len() > scheme.len()
        });
        if !scheme_ok {
            return Err(BarkError::invalid(format!(
                "base url {:?} must be an absolute http(s) URL",
                self.base_url
            )));
        }
        Ok(())
    }

    pub fn endpoint(&self, kind: ProviderKind) -> String {
        format!(
            "{}{}",
            self.base_url.trim_end_matches('/'),
            kind.endpoint_path()
        )
    }
}

/// A backend that completes an assembled conversation.
pub trait Provider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    /// Identifies the endpoint in response-cache keys.
    fn base_url(&self) -> &str;

    fn complete(&self, messages: &[Message], params: &PromptParameters) -> Result<ChatResponse>;
}

/// OpenAI-compatible, router and Ollama backends over HTTP/1.1.
pub struct HttpProvider {
    kind: ProviderKind,
    config: ProviderConfig,
    agent: ureq::Agent,
}

impl fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpProvider")
            .field("kind", &self.kind)
            .field("config", &self.config)
            .finish()
    }
}

impl HttpProvider {
    pub fn new(kind: ProviderKind, config: ProviderConfig) -> Result<Self> {
        if kind == ProviderKind::Mock {
            return Err(BarkError::invalid("mock provider does not use HTTP"));
        }
        config.validate()?;
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        Ok(Self {
            kind,
            config,
            agent,
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn post_once(&self, body: &str) -> Result<String> {
        let mut req = self
            .agent
            .post(&self.config.endpoint(self.kind))
            .set("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.set("Authorization", &format!("Bearer {}", key.expose()));
        }
        for (name, value) in &self.config.extra_headers {
            req = req.set(name, value);
        }
        match req.send_string(body) {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| BarkError::Network(format!("reading response body: {e}"))),
            Err(ureq::Error::Status(status, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                Err(BarkError::provider(status, body))
            }
            Err(ureq::Error::Transport(t)) => Err(BarkError::Network(t.to_string())),
        }
    }
}

impl Provider for HttpProvider {
    fn kind(&self) -> ProviderKind {
        self.kind
    }

    fn base_url(&self) -> &str {
        &self.config.base_url
    }

    fn complete(&self, messages: &[Message], params: &PromptParameters) -> Result<ChatResponse> {
        let secret = self.config.api_key.as_ref().map(Secret::expose);
        let filled;
        let params = if params.model.is_empty() && !self.config.default_model.is_empty() {
            filled = PromptParameters {
                model: self.config.default_model.clone(),
                ..params.clone()
            };
            &filled
        } else {
            params
        };
        let body = self.kind.build_request(messages, params)?.to_string();

        let mut attempt = 0;
        let text = loop {
            match self.post_once(&body) {
                Ok(text) => break text,
                Err(err) if err.retryable() && attempt < self.config.retry.max_retries => {
                    attempt += 1;
                    tracing::debug!(kind = %self.kind, attempt, "retrying after {}", err.clone().redact(secret));
                    std::thread::sleep(self.config.retry.backoff);
                }
                Err(err) => return Err(err.redact(secret)),
            }
        };
        let mut resp = self
            .kind
            .parse_response(&text)
            .map_err(|e| e.redact(secret))?;
        if resp.model.is_empty() {
            resp.model = params.model.clone();
        }
        Ok(resp)
    }
}

/// One-shot send without keeping a provider around. `Mock` uses a fresh echo
/// mock and never touches the network.
pub fn send(
    config: &ProviderConfig,
    kind: ProviderKind,
    messages: &[Message],
    params: &PromptParameters,
) -> Result<ChatResponse> {
    match kind {
        ProviderKind::Mock => MockProvider::echo().complete(messages, params),
        _ => HttpProvider::new(kind, config.clone())?.complete(messages, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_per_kind() {
        let cfg = ProviderConfig::new("http://h:1/v1/", "m");
        assert_eq!(
            cfg.endpoint(ProviderKind::OpenAICompatible),
            "http://h:1/v1/chat/completions"
        );
        assert_eq!(
            cfg.endpoint(ProviderKind::Router),
            "http://h:1/v1/chat/completions"
        );
        assert_eq!(cfg.endpoint(ProviderKind::Ollama), "http://h:1/v1/api/chat");
    }

    #[test]
    fn base_url_scheme_checked() {
        assert!(ProviderConfig::new("https://x", "m").validate().is_ok());
        assert!(ProviderConfig::new("HTTP://x", "m").validate().is_ok());
        assert!(ProviderConfig::new("ftp://x", "m").validate().is_err());
        assert!(ProviderConfig::new("localhost:80", "m").validate().is_err());
        assert!(ProviderConfig::new("http://", "m").validate().is_err());
    }

    #[test]
    fn debug_never_shows_key() {
        let cfg = ProviderConfig::new("https://x", "m").with_api_key("sk-secret-1");
        let provider = HttpProvider::new(ProviderKind::OpenAICompatible, cfg).unwrap();
        assert!(!format!("{provider:?}").contains("sk-secret-1"));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "openai".parse::<ProviderKind>().unwrap(),
            ProviderKind::OpenAICompatible
        );
        assert_eq!(
            "OpenRouter".parse::<ProviderKind>().unwrap(),
            ProviderKind::Router
        );
        assert!("bogus".parse::<ProviderKind>().is_err());
        assert_eq!(ProviderKind::Router.default_base_url(), ROUTER_BASE_URL);
    }

    #[test]
    fn mock_send_is_offline() {
        let cfg = ProviderConfig::new("http://127.0.0.1:9", "m");
        let resp = send(
            &cfg,
            ProviderKind::Mock,
            &[Message::user("hi")],
            &PromptParameters::new("m"),
        )
        .unwrap();
        assert_eq!(resp.text, "echo: hi");
    }
}
