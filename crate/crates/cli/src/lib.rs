//! The `kennel` command line: `chat`, `index`, `review` and `serve`.
//!
//! Exit codes: 0 success, 2 configuration / I/O / provider failure,
//! 3 when the model never returns a valid review.

pub mod args;
pub mod chat;
pub mod error;
pub mod index;
pub mod provider;
pub mod review;
pub mod serve;

use std::io::{BufRead, Write};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use kennel_core::rag::{KeywordHandler, RagChatter};
use kennel_core::retrieval::ChunkOptions;
use kennel_core::{Chatter, FileSystemCache, ProviderChatter, SessionId};
use kennel_service::ServiceConfig;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult, Exit};

fn fresh_session(prefix: &str) -> CliResult<SessionId> {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    Ok(SessionId::new(format!(
        "{prefix}-{nanos:x}-{}",
        std::process::id()
    ))?)
}

/// Runs one command against the given streams.
pub fn run(
    cli: Cli,
    input: impl BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    match cli.command {
        Command::Chat {
            session,
            rag_index,
            top_k,
            sampling,
        } => {
            let resolved = provider::resolve(&cli.provider)?;
            let params = provider::params(&resolved.config.default_model, &sampling)?;
            let cache = Arc::new(FileSystemCache::open(&cli.cache_dir)?);
            let base = Arc::new(ProviderChatter::new(
                resolved.provider,
                cache,
                params.clone(),
            ));
            let chatter: Arc<dyn Chatter> = match rag_index {
                Some(path) => Arc::new(RagChatter::new(
                    base,
                    Arc::new(KeywordHandler::open(&path)?.with_top_k(top_k)),
                )),
                None => base,
            };
            let session = SessionId::new(session)?;
            chat::repl(chatter.as_ref(), &session, &params, input, out, err)
        }
        Command::Index {
            dir,
            out: out_path,
            max_tokens,
            overlap,
        } => {
            let opts = ChunkOptions::new(max_tokens, overlap)?;
            let (index, summary) = index::build(&dir, opts)?;
            index.save(&out_path)?;
            writeln!(
                out,
                "{} documents, {} chunks -> {}",
                summary.documents,
                summary.chunks,
                out_path.display()
            )?;
            if summary.skipped > 0 {
                writeln!(err, "skipped {} files without words", summary.skipped)?;
            }
            Ok(())
        }
        Command::Review {
            rules,
            sources,
            sampling,
        } => {
            let rules_text = std::fs::read_to_string(&rules)
                .map_err(|e| CliError::config(format!("reading {}: {e}", rules.display())))?;
            let sources = review::read_sources(&sources)?;
            let resolved = provider::resolve(&cli.provider)?;
            let params = provider::params(&resolved.config.default_model, &sampling)?;
            let cache = Arc::new(FileSystemCache::open(&cli.cache_dir)?);
            let chatter = ProviderChatter::new(resolved.provider, cache, params.clone());
            let session = fresh_session("review")?;
            let outcome = review::run(&chatter, &session, &params, &rules_text, &sources)?;
            let pretty = serde_json::to_string_pretty(&outcome.report)
                .map_err(|e| CliError::config(e.to_string()))?;
            writeln!(out, "{pretty}")?;
            Ok(())
        }
        Command::Serve {
            listen,
            source_store,
            corpus_index,
            static_dir,
            cors_origin,
            response_cache,
        } => {
            let resolved = provider::resolve(&cli.provider)?;
            let mut config = ServiceConfig::new(resolved.kind, resolved.config, &cli.cache_dir);
            config.listen = listen
                .parse()
                .map_err(|e| CliError::config(format!("--listen {listen}: {e}")))?;
            config.source_store = source_store;
            config.corpus_index = corpus_index;
            config.static_dir = static_dir;
            config.cors_origin = cors_origin;
            config.response_cache = response_cache;
            serve::run(config, resolved.provider, out)
        }
    }
}
