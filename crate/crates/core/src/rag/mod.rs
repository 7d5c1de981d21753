//! Retrieval-augmented generation.
//!
//! A [`RagHandler`] fetches context [`Chunk`]s for the current turn and
//! rewrites the final user prompt to embed them. [`RagChatter`] decorates any
//! [`Chatter`](crate::chatter::Chatter) with a handler; decorators nest.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{BarkError, Result};
use crate::retrieval::InvertedIndex;
use crate::types::{Message, PromptParameters, Role, SessionId};

mod composite;
mod decorator;
mod keyword;
mod source;
mod template;
mod web;

pub use composite::CompositeHandler;
pub use decorator::RagChatter;
pub use keyword::KeywordHandler;
pub use source::{KnowledgeSourceConfig, SourceKind, SourceSettings, DEFAULT_TOP_K, REDACTED};
pub use template::{PromptTemplate, DEFAULT_TEMPLATE};
pub use web::WebSearchHandler;

/// An index shared between a handler and whoever ingests documents.
pub type SharedIndex = Arc<RwLock<InvertedIndex>>;

/// One retrieved context fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub source: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Chunk {
    pub fn new(source: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            text: text.into(),
            score: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.is_empty() {
            return Err(BarkError::rag(format!(
                "chunk from {:?} has empty text",
                self.source
            )));
        }
        if let Some(s) = self.score {
            if s.is_nan() || s < 0.0 {
                return Err(BarkError::rag(format!(
                    "chunk from {:?} has negative score {s}",
                    self.source
                )));
            }
        }
        Ok(())
    }
}

pub trait RagHandler: Send + Sync {
    fn get_chunks(
        &self,
        session: &SessionId,
        params: &PromptParameters,
        messages: &[Message],
    ) -> Result<Vec<Chunk>>;

    fn transform_last_prompt(
        &self,
        _session: &SessionId,
        _params: &PromptParameters,
        messages: &[Message],
        chunks: &[Chunk],
    ) -> Message {
        default_transform_last_prompt(messages, chunks, &PromptTemplate::default())
    }
}

/// Retrieves nothing; decorating with it changes nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityHandler;

impl RagHandler for IdentityHandler {
    fn get_chunks(&self, _: &SessionId, _: &PromptParameters, _: &[Message]) -> Result<Vec<Chunk>> {
        Ok(Vec::new())
    }
}

/// The last message when it is a user prompt.
pub fn last_user_message(messages: &[Message]) -> Result<&Message> {
    match messages.last() {
        Some(m) if m.role == Role::User => Ok(m),
        Some(m) => Err(BarkError::rag(format!(
            "last message must be a user prompt, found {}",
            m.role
        ))),
        None => Err(BarkError::rag("no messages to retrieve for")),
    }
}

/// Renders `[source]\ntext` blocks separated by blank lines.
pub fn render_context(chunks: &[Chunk]) -> String {
    chunks
        .iter()
        .map(|c| format!("[{}]\n{}", c.source, c.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Returns the last message unchanged when there are no chunks, otherwise a
/// user message with the template filled in.
pub fn default_transform_last_prompt(
    messages: &[Message],
    chunks: &[Chunk],
    template: &PromptTemplate,
) -> Message {
    let last = messages
        .last()
        .cloned()
        .unwrap_or_else(|| Message::user(""));
    if chunks.is_empty() {
        return last;
    }
    Message {
        role: Role::User,
        content: template.render(&render_context(chunks), &last.content),
        created_at: last.created_at,
    }
}
