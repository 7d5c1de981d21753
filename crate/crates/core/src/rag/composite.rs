use std::collections::HashSet;
use std::sync::Arc;

use super::{default_transform_last_prompt, Chunk, PromptTemplate, RagHandler, DEFAULT_TOP_K};
use crate::error::{BarkError, Result};
use crate::types::{Message, PromptParameters, SessionId};

/// Runs several handlers in order and merges their chunks.
///
/// Results are concatenated in handler order, deduplicated on
/// `(source, text)` keeping the first copy, then cut to `top_k`. A failing
/// handler is logged and skipped; only when every handler fails does the
/// composite fail.
pub struct CompositeHandler {
    handlers: Vec<Arc<dyn RagHandler>>,
    top_k: usize,
    template: PromptTemplate,
}

impl CompositeHandler {
    pub fn new(handlers: Vec<Arc<dyn RagHandler>>) -> Result<Self> {
        if handlers.is_empty() {
            return Err(BarkError::invalid(
                "composite handler needs at least one inner handler",
            ));
        }
        Ok(Self {
            handlers,
            top_k: DEFAULT_TOP_K,
            template: PromptTemplate::default(),
        })
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k.max(1);
        self
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }
}

impl RagHandler for CompositeHandler {
    fn get_chunks(
        &self,
        session: &SessionId,
        params: &PromptParameters,
        messages: &[Message],
    ) -> Result<Vec<Chunk>> {
        let mut merged = Vec::new();
        let mut seen = HashSet::new();
        let mut failures = Vec::new();
        for (i, handler) in self.handlers.iter().enumerate() {
            match handler.get_chunks(session, params, messages) {
                Ok(chunks) => {
                    for c in chunks {
                        if seen.insert((c.source.clone(), c.text.clone())) {
                            merged.push(c);
                        }
                    }
                }
                Err(err) => {
                    tracing::warn!(handler = i, error = %err, "retrieval handler failed; skipping");
                    failures.push(err);
                }
            }
        }
        if failures.len() == self.handlers.len() {
            let last = failures.pop().expect("at least one handler");
            return Err(BarkError::rag_from(
                format!("all {} retrieval handlers failed", self.handlers.len()),
                last,
            ));
        }
        merged.truncate(self.top_k);
        Ok(merged)
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
