use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, DocumentChunk};
use crate::error::{BarkError, Result};

pub const INDEX_FORMAT_VERSION: u32 = 1;

/// BM25 constants. Defaults match Lucene's `BM25Similarity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Identifies a chunk. Orders by doc id, then chunk index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChunkKey {
    pub doc_id: String,
    pub chunk_index: u32,
}

impl ChunkKey {
    pub fn new(doc_id: impl Into<String>, chunk_index: u32) -> Self {
        Self {
            doc_id: doc_id.into(),
            chunk_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredChunk {
    pub chunk: DocumentChunk,
    pub score: f64,
}

/// Term → postings map over document chunks.
///
/// Single writer, many readers: `search` and `bm25_score` take `&self`,
/// mutation takes `&mut self`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvertedIndex {
    params: Bm25Params,
    chunks: BTreeMap<ChunkKey, DocumentChunk>,
    postings: BTreeMap<String, BTreeMap<ChunkKey, u32>>,
    total_tokens: u64,
}

impl InvertedIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_params(params: Bm25Params) -> Self {
        Self {
            params,
            ..Self::default()
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// Number of stored chunks.
    pub fn doc_count(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Mean chunk length in tokens, 0 when empty.
    pub fn avgdl(&self) -> f64 {
        if self.chunks.is_empty() {
            0.0
        } else {
            self.total_tokens as f64 / self.chunks.len() as f64
        }
    }

    pub fn document_count(&self) -> usize {
        let mut last: Option<&str> = None;
        let mut n = 0;
        for key in self.chunks.keys() {
            if last != Some(key.doc_id.as_str()) {
                n += 1;
                last = Some(&key.doc_id);
            }
        }
        n
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.chunks_of(doc_id).next().is_some()
    }

    pub fn chunk(&self, key: &ChunkKey) -> Option<&DocumentChunk> {
        self.chunks.get(key)
    }

    pub fn chunks(&self) -> impl Iterator<Item = &DocumentChunk> {
        self.chunks.values()
    }

    pub fn chunks_of<'a>(&'a self, doc_id: &'a str) -> impl Iterator<Item = &'a DocumentChunk> {
        self.chunks
            .range(ChunkKey::new(doc_id, 0)..)
            .take_while(move |(k, _)| k.doc_id == doc_id)
            .map(|(_, c)| c)
    }

    /// Document frequency of a term.
    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, BTreeMap::len)
    }

    pub fn term_frequency(&self, term: &str, key: &ChunkKey) -> u32 {
        self.postings
            .get(term)
            .and_then(|p| p.get(key))
            .copied()
            .unwrap_or(0)
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`
    pub fn idf(&self, df: usize) -> f64 {
        let n = self.chunks.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Adds chunks. Every doc id present in `chunks` first loses all of its
    /// previously stored chunks, so re-adding a document replaces it. The
    /// batch is validated before anything changes.
    pub fn add(&mut self, chunks: Vec<DocumentChunk>) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &chunks {
            let actual = tokenize(&c.text).len();
            if actual == 0 {
                return Err(BarkError::invalid(format!(
                    "chunk {}#{} has no tokens",
                    c.doc_id, c.chunk_index
                )));
            }
            if actual != c.token_count as usize {
                return Err(BarkError::invalid(format!(
                    "chunk {}#{} declares {} tokens but has {actual}",
                    c.doc_id, c.chunk_index, c.token_count
                )));
            }
            if !seen.insert(c.key()) {
                return Err(BarkError::invalid(format!(
                    "duplicate chunk {}#{}",
                    c.doc_id, c.chunk_index
                )));
            }
        }
        let replaced: HashSet<&str> = chunks.iter().map(|c| c.doc_id.as_str()).collect();
        for doc_id in replaced {
            self.remove(doc_id);
        }
        for chunk in chunks {
            self.insert(chunk);
        }
        Ok(())
    }

    fn insert(&mut self, chunk: DocumentChunk) {
        let key = chunk.key();
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for term in tokenize(&chunk.text) {
            *tf.entry(term).or_default() += 1;
        }
        for (term, count) in tf {
            self.postings
                .entry(term)
                .or_default()
                .insert(key.clone(), count);
        }
        self.total_tokens += u64::from(chunk.token_count);
        self.chunks.insert(key, chunk);
    }

    /// Removes every chunk of `doc_id`. Returns how many were removed.
    pub fn remove(&mut self, doc_id: &str) -> usize {
        let keys: Vec<ChunkKey> = self.chunks_of(doc_id).map(DocumentChunk::key).collect();
        for key in &keys {
            let chunk = self.chunks.remove(key).expect("key listed above");
            self.total_tokens -= u64::from(chunk.token_count);
            let mut terms: Vec<String> = tokenize(&chunk.text);
            terms.sort();
            terms.dedup();
            for term in terms {
                if let Some(list) = self.postings.get_mut(&term) {
                    list.remove(key);
                    if list.is_empty() {
                        self.postings.remove(&term);
                    }
                }
            }
        }
        keys.len()
    }

    /// BM25 score of one chunk. Repeated query terms count once.
    pub fn bm25_score(&self, query_terms: &[String], key: &ChunkKey) -> f64 {
        let Some(chunk) = self.chunks.get(key) else {
            return 0.0;
        };
        let avgdl = self.avgdl();
        let len = f64::from(chunk.token_count);
        let Bm25Params { k1, b } = self.params;
        let mut seen = HashSet::new();
        let mut score = 0.0;
        for term in query_terms {
            if !seen.insert(term.as_str()) {
                continue;
            }
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let Some(&tf) = list.get(key) else {
                continue;
            };
            let tf = f64::from(tf);
            let idf = self.idf(list.len());
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl));
        }
        score
    }

    /// Top-`k` chunks for `query`, best first. Ties go to the smaller
    /// (doc id, chunk index). Chunks scoring zero are never returned.
    pub fn search(&self, query: &str, k: usize) -> Vec<ScoredChunk> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let terms = tokenize(query);
        let mut candidates: Vec<&ChunkKey> = terms
            .iter()
            .filter_map(|t| self.postings.get(t))
            .flat_map(BTreeMap::keys)
            .collect();
        candidates.sort();
        candidates.dedup();

        let mut scored: Vec<(f64, &ChunkKey)> = candidates
            .into_iter()
            .map(|key| (self.bm25_score(&terms, key), key))
            .filter(|(s, _)| *s > 0.0)
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored.truncate(k);
        scored
            .into_iter()
            .map(|(score, key)| ScoredChunk {
                chunk: self.chunks[key].clone(),
                score,
            })
            .collect()
    }

    fn postings_table(&self) -> BTreeMap<String, Vec<(String, u32, u32)>> {
        self.postings
            .iter()
            .map(|(term, list)| {
                let entries = list
                    .iter()
                    .map(|(k, tf)| (k.doc_id.clone(), k.chunk_index, *tf))
                    .collect();
                (term.clone(), entries)
            })
            .collect()
    }

    /// Serializes to the on-disk JSON format.
    pub fn to_json(&self) -> String {
        let file = IndexFile {
            version: INDEX_FORMAT_VERSION,
            k1: self.params.k1,
            b: self.params.b,
            chunks: self.chunks.values().cloned().collect(),
            postings: self.postings_table(),
        };
        serde_json::to_string(&file).expect("index serialization cannot fail")
    }

    /// Parses the on-disk format. Postings are rebuilt from the chunks and
    /// must agree with the stored ones.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: IndexFile = serde_json::from_str(text)
            .map_err(|e| BarkError::cache(format!("malformed index file: {e}")))?;
        if file.version != INDEX_FORMAT_VERSION {
            return Err(BarkError::cache(format!(
                "unsupported index version {} (expected {INDEX_FORMAT_VERSION})",
                file.version
            )));
        }
        let mut index = InvertedIndex::with_params(Bm25Params {
            k1: file.k1,
            b: file.b,
        });
        index
            .add(file.chunks)
            .map_err(|e| BarkError::cache(format!("invalid chunk in index file: {e}")))?;
        if index.postings_table() != file.postings {
            return Err(BarkError::cache("index postings do not match its chunks"));
        }
        Ok(index)
    }

    /// Writes the index as one JSON document via temp file and rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| BarkError::cache(format!("saving {}: {e}", path.display()));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(self.to_json().as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .and_then(|_| f.sync_data())
            .map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| BarkError::cache(format!("loading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    k1: f64,
    b: f64,
    chunks: Vec<DocumentChunk>,
    postings: BTreeMap<String, Vec<(String, u32, u32)>>,
}
