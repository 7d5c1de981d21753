use std::path::Path;

use kennel_core::retrieval::{chunk_document, ChunkOptions, InvertedIndex};
use walkdir::WalkDir;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexSummary {
    pub documents: usize,
    pub chunks: usize,
    /// Files without a single word.
    pub skipped: usize,
}

fn indexable(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("txt") | Some("md")
    )
}

/// Indexes every `.txt`/`.md` file under `dir`. Document ids are paths
/// relative to `dir` with `/` separators; files are visited in sorted order
/// so the result is reproducible.
pub fn build(dir: &Path, opts: ChunkOptions) -> CliResult<(InvertedIndex, IndexSummary)> {
    if !dir.is_dir() {
        return Err(CliError::config(format!(
            "{} is not a readable directory",
            dir.display()
        )));
    }
    let mut index = InvertedIndex::new();
    let mut summary = IndexSummary {
        documents: 0,
        chunks: 0,
        skipped: 0,
    };
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry =
            entry.map_err(|e| CliError::config(format!("walking {}: {e}", dir.display())))?;
        if !entry.file_type().is_file() || !indexable(entry.path()) {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
        let doc_id = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let text = std::fs::read_to_string(entry.path())
            .map_err(|e| CliError::config(format!("reading {}: {e}", entry.path().display())))?;
        let chunks = chunk_document(&doc_id, &text, opts)?;
        if chunks.is_empty() {
            tracing::warn!(%doc_id, "no words; skipped");
            summary.skipped += 1;
            continue;
        }
        summary.documents += 1;
        summary.chunks += chunks.len();
        index.add(chunks)?;
    }
    Ok((index, summary))
}
