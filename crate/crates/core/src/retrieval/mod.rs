//! Keyword retrieval: tokenizer, chunker and a BM25-ranked inverted index.

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::error::{BarkError, Result};

mod index;

pub use index::{Bm25Params, ChunkKey, InvertedIndex, ScoredChunk, INDEX_FORMAT_VERSION};

/// Unicode word segmentation, lowercased. Punctuation is dropped; there is no
/// stemming and no stopword list.
pub fn tokenize(text: &str) -> Vec<String> {
    text.unicode_words().map(str::to_lowercase).collect()
}

/// A stored slice of a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub doc_id: String,
    pub chunk_index: u32,
    pub text: String,
    pub token_count: u32,
}

impl DocumentChunk {
    /// Builds a chunk whose token count is derived from its text.
    pub fn new(doc_id: impl Into<String>, chunk_index: u32, text: impl Into<String>) -> Self {
        let text = text.into();
        let token_count = tokenize(&text).len() as u32;
        Self {
            doc_id: doc_id.into(),
            chunk_index,
            text,
            token_count,
        }
    }

    pub fn key(&self) -> ChunkKey {
        ChunkKey::new(self.doc_id.clone(), self.chunk_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkOptions {
    pub max_tokens: usize,
    pub overlap: usize,
}

impl Default for ChunkOptions {
    fn default() -> Self {
        Self {
            max_tokens: 256,
            overlap: 32,
        }
    }
}

impl ChunkOptions {
    pub fn new(max_tokens: usize, overlap: usize) -> Result<Self> {
        let opts = Self {
            max_tokens,
            overlap,
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_tokens == 0 {
            return Err(BarkError::invalid("max_tokens must be at least 1"));
        }
        if self.overlap >= self.max_tokens {
            return Err(BarkError::invalid(format!(
                "overlap {} must be smaller than max_tokens {}",
                self.overlap, self.max_tokens
            )));
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.max_tokens - self.overlap
    }
}

/// Splits a document into overlapping token windows.
///
/// Windows advance by `max_tokens - overlap` tokens and the last partial
/// window is kept. Each chunk's text is the original span from its first
/// token to its last, so casing and punctuation survive for prompting.
pub fn chunk_document(doc_id: &str, text: &str, opts: ChunkOptions) -> Result<Vec<DocumentChunk>> {
    opts.validate()?;
    let words: Vec<(usize, &str)> = text.unicode_word_indices().collect();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < words.len() {
        let end = (start + opts.max_tokens).min(words.len());
        let (first_off, _) = words[start];
        let (last_off, last_word) = words[end - 1];
        let span = &text[first_off..last_off + last_word.len()];
        chunks.push(DocumentChunk::new(doc_id, chunks.len() as u32, span));
        if end == words.len() {
            break;
        }
        start += opts.stride();
    }
    Ok(chunks)
}
