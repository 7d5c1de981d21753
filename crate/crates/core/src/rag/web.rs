//! Web-search retrieval over a small JSON contract:
//!
//! ```text
//! POST {endpoint}  {"query": "...", "max_results": k}
//!   -> {"results": [{"title", "url", "content", "score"}]}
//! ```

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{
    default_transform_last_prompt, last_user_message, Chunk, PromptTemplate, RagHandler,
    DEFAULT_TOP_K,
};
use crate::error::{BarkError, Result};
use crate::providers::Secret;
use crate::types::{Message, PromptParameters, SessionId};

#[derive(Debug, Deserialize)]
struct SearchReply {
    results: Vec<SearchResult>,
}

#[derive(Debug, Deserialize)]
struct SearchResult {
    #[serde(default)]
    title: Option<String>,
    url: String,
    #[serde(default)]
    content: String,
    #[serde(default)]
    score: Option<f64>,
}

pub struct WebSearchHandler {
    endpoint: String,
    api_key: Option<Secret>,
    top_k: usize,
    template: PromptTemplate,
    agent: ureq::Agent,
}

impl std::fmt::Debug for WebSearchHandler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WebSearchHandler")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key)
            .field("top_k", &self.top_k)
            .finish()
    }
}

impl WebSearchHandler {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            top_k: DEFAULT_TOP_K,
            template: PromptTemplate::default(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(30))
                .build(),
        }
    }

    /// Sent as a bearer token.
    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(Secret::new(key));
        self
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k.max(1);
        self
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }

    fn search(&self, query: &str) -> Result<Vec<Chunk>> {
        let body = json!({"query": query, "max_results": self.top_k}).to_string();
        let mut req = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {}", key.expose()));
        }
        let text = match req.send_string(&body) {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| BarkError::Network(format!("reading search reply: {e}")))?,
            Err(ureq::Error::Status(status, resp)) => {
                return Err(BarkError::provider(
                    status,
                    resp.into_string().unwrap_or_default(),
                ))
            }
            Err(ureq::Error::Transport(t)) => return Err(BarkError::Network(t.to_string())),
        };
        let reply: SearchReply = serde_json::from_str(&text)?;
        Ok(reply
            .results
            .into_iter()
            .filter(|r| !r.content.is_empty())
            .map(|r| {
                let mut chunk = Chunk::new(r.url, r.content);
                chunk.score = r.score.filter(|s| *s >= 0.0);
                if let Some(title) = r.title {
                    chunk = chunk.with_metadata("title", title);
                }
                chunk
            })
            .collect())
    }
}

impl RagHandler for WebSearchHandler {
    fn get_chunks(
        &self,
        _session: &SessionId,
        _params: &PromptParameters,
        messages: &[Message],
    ) -> Result<Vec<Chunk>> {
        let query = last_user_message(messages)?;
        let secret = self.api_key.as_ref().map(Secret::expose);
        self.search(&query.content)
            .map_err(|e| BarkError::rag_from("web search", e).redact(secret))
    }

    fn transform_last_prompt(
        &self,
        _session: &SessionId,
        _params: &PromptParameters,
        messages: &[Message],
        chunks: &[Chunk],
    ) -> Message {
        default_transform_last_prompt(messages, chunks, &self.template)
    }
}
