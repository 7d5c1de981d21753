use std::path::Path;
use std::sync::{Arc, RwLock};

use super::{
    default_transform_last_prompt, last_user_message, Chunk, PromptTemplate, RagHandler,
    SharedIndex, DEFAULT_TOP_K,
};
use crate::error::{BarkError, Result};
use crate::retrieval::InvertedIndex;
use crate::types::{Message, PromptParameters, SessionId};

/// BM25 search over a keyword index, queried with the last user prompt.
#[derive(Debug, Clone)]
pub struct KeywordHandler {
    index: SharedIndex,
    top_k: usize,
    template: PromptTemplate,
}

impl KeywordHandler {
    pub fn new(index: SharedIndex) -> Self {
        Self {
            index,
            top_k: DEFAULT_TOP_K,
            template: PromptTemplate::default(),
        }
    }

    pub fn from_index(index: InvertedIndex) -> Self {
        Self::new(Arc::new(RwLock::new(index)))
    }

    /// Loads an index file; failures surface as retrieval errors.
    pub fn open(path: &Path) -> Result<Self> {
        let index = InvertedIndex::load(path)
            .map_err(|e| BarkError::rag_from(format!("keyword index {}", path.display()), e))?;
        Ok(Self::from_index(index))
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k.max(1);
        self
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }

    pub fn index(&self) -> &SharedIndex {
        &self.index
    }
}

impl RagHandler for KeywordHandler {
    fn get_chunks(
        &self,
        _session: &SessionId,
        _params: &PromptParameters,
        messages: &[Message],
    ) -> Result<Vec<Chunk>> {
        let query = last_user_message(messages)?;
        let index = self
            .index
            .read()
            .map_err(|_| BarkError::rag("keyword index unavailable"))?;
        Ok(index
            .search(&query.content, self.top_k)
            .into_iter()
            .map(|hit| {
                Chunk::new(hit.chunk.doc_id, hit.chunk.text)
                    .with_score(hit.score)
                    .with_metadata("chunk_index", hit.chunk.chunk_index.to_string())
            })
            .collect())
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
