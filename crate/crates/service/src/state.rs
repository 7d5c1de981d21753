use std::collections::HashMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use kennel_core::rag::{
    KnowledgeSourceConfig, RagChatter, RagHandler, SharedIndex, SourceSettings, REDACTED,
};
use kennel_core::retrieval::{chunk_document, ChunkOptions, InvertedIndex};
use kennel_core::{
    BarkError, Chatter, FileSystemCache, HttpProvider, Message, MockProvider, PromptParameters,
    Provider, ProviderChatter, ProviderConfig, ProviderKind, Result, SessionId, Usage,
};
use serde::{Deserialize, Serialize};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub provider_kind: ProviderKind,
    pub provider: ProviderConfig,
    /// Used for chats whose request carries no parameters.
    pub defaults: PromptParameters,
    pub cache_dir: PathBuf,
    /// Defaults to `{cache_dir}/knowledge_source.json`.
    pub source_store: Option<PathBuf>,
    /// Index fed by `POST /api/documents`. Defaults to `{cache_dir}/corpus.json`.
    pub corpus_index: Option<PathBuf>,
    pub chunking: ChunkOptions,
    /// Directory served at `/` (the built web UI), if any.
    pub static_dir: Option<PathBuf>,
    /// Allowed CORS origin; any origin when unset.
    pub cors_origin: Option<String>,
    pub response_cache: bool,
}

impl ServiceConfig {
    pub fn new(
        provider_kind: ProviderKind,
        provider: ProviderConfig,
        cache_dir: impl Into<PathBuf>,
    ) -> Self {
        let defaults = PromptParameters::new(provider.default_model.clone());
        Self {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            provider_kind,
            provider,
            defaults,
            cache_dir: cache_dir.into(),
            source_store: None,
            corpus_index: None,
            chunking: ChunkOptions::default(),
            static_dir: None,
            cors_origin: None,
            response_cache: false,
        }
    }

    /// Offline configuration backed by the echo mock.
    pub fn mock(cache_dir: impl Into<PathBuf>) -> Self {
        Self::new(
            ProviderKind::Mock,
            ProviderConfig::new("mock://", "mock"),
            cache_dir,
        )
    }

    pub fn source_store_path(&self) -> PathBuf {
        self.source_store
            .clone()
            .unwrap_or_else(|| self.cache_dir.join("knowledge_source.json"))
    }

    pub fn corpus_index_path(&self) -> PathBuf {
        self.corpus_index
            .clone()
            .unwrap_or_else(|| self.cache_dir.join("corpus.json"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.provider_kind != ProviderKind::Mock {
            self.provider.validate()?;
        }
        self.chunking.validate()?;
        self.defaults.validate()
    }
}

/// Body of a successful chat turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
    pub finish_reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    pub chunks_used: Vec<ChunkUsed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkUsed {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReply {
    pub doc_id: String,
    pub chunks: usize,
    pub replaced: bool,
}

struct ActiveSource {
    config: KnowledgeSourceConfig,
    handler: Option<Arc<dyn RagHandler>>,
}

/// Everything the HTTP handlers share. All methods block; the router runs
/// them on the blocking pool.
pub struct AppState {
    config: ServiceConfig,
    base: Arc<ProviderChatter>,
    /// Chats hold the read side for their whole turn, so swapping the
    /// knowledge source waits for in-flight chats.
    active: RwLock<ActiveSource>,
    /// Live indexes by absolute path, shared between ingestion and handlers.
    indexes: Mutex<HashMap<PathBuf, SharedIndex>>,
}

impl AppState {
    /// Builds the provider from the configuration. `Mock` echoes.
    pub fn open(config: ServiceConfig) -> Result<Arc<Self>> {
        let provider: Arc<dyn Provider> = match config.provider_kind {
            ProviderKind::Mock => Arc::new(MockProvider::echo()),
            kind => Arc::new(HttpProvider::new(kind, config.provider.clone())?),
        };
        Self::with_provider(config, provider)
    }

    pub fn with_provider(config: ServiceConfig, provider: Arc<dyn Provider>) -> Result<Arc<Self>> {
        config.validate()?;
        let cache = Arc::new(FileSystemCache::open(&config.cache_dir)?);
        let base = Arc::new(
            ProviderChatter::new(provider, cache, config.defaults.clone())
                .with_response_cache(config.response_cache),
        );
        let state = Arc::new(Self {
            config,
            base,
            active: RwLock::new(ActiveSource {
                config: KnowledgeSourceConfig::none(),
                handler: None,
            }),
            indexes: Mutex::new(HashMap::new()),
        });
        let store = state.config.source_store_path();
        if store.exists() {
            let text = fs::read_to_string(&store)
                .map_err(|e| BarkError::cache(format!("reading {}: {e}", store.display())))?;
            let saved: KnowledgeSourceConfig = serde_json::from_str(&text).map_err(|e| {
                BarkError::cache(format!("knowledge source store {}: {e}", store.display()))
            })?;
            let handler = state.build(&saved)?;
            *state.active.write().unwrap() = ActiveSource {
                config: saved,
                handler,
            };
        }
        Ok(state)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn chatter(&self) -> &Arc<ProviderChatter> {
        &self.base
    }

    /// Scrubs every configured credential from an error.
    pub fn redact(&self, err: BarkError) -> BarkError {
        let mut err = err.redact(self.config.provider.api_key.as_ref().map(|k| k.expose()));
        if let Ok(active) = self.active.try_read() {
            for (_, key) in active.config.web_credentials() {
                err = err.redact(key);
            }
        }
        err
    }

    fn shared_index(&self, path: &Path) -> Result<SharedIndex> {
        let abs = std::path::absolute(path)
            .map_err(|e| BarkError::invalid(format!("index path {}: {e}", path.display())))?;
        let mut indexes = self.indexes.lock().unwrap();
        if let Some(idx) = indexes.get(&abs) {
            return Ok(idx.clone());
        }
        // A missing file is an empty corpus that ingestion will create.
        let index = if abs.exists() {
            InvertedIndex::load(&abs)?
        } else {
            InvertedIndex::new()
        };
        let shared: SharedIndex = Arc::new(RwLock::new(index));
        indexes.insert(abs, shared.clone());
        Ok(shared)
    }

    fn build(&self, config: &KnowledgeSourceConfig) -> Result<Option<Arc<dyn RagHandler>>> {
        config.build_handler(&mut |p| self.shared_index(p))
    }

    /// One chat turn, decorated with the active knowledge source.
    pub fn chat(
        &self,
        session: &str,
        prompt: &str,
        params: Option<PromptParameters>,
    ) -> Result<ChatReply> {
        let session = SessionId::new(session)?;
        let params = params.map(|mut p| {
            if p.model.is_empty() {
                p.model = self.config.defaults.model.clone();
            }
            p
        });
        let active = self.active.read().unwrap();
        let turn = match &active.handler {
            Some(handler) => RagChatter::new(self.base.clone(), handler.clone()).bark_turn(
                &session,
                prompt,
                params.as_ref(),
            ),
            None => self.base.bark_turn(&session, prompt, params.as_ref()),
        }?;
        Ok(ChatReply {
            text: turn.response.text,
            finish_reason: turn.response.finish_reason.as_str().to_string(),
            usage: turn.response.usage,
            chunks_used: turn
                .chunks
                .into_iter()
                .map(|c| ChunkUsed {
                    source: c.source,
                    score: c.score,
                })
                .collect(),
        })
    }

    pub fn history(&self, session: &str) -> Result<Vec<Message>> {
        let session = SessionId::new(session)?;
        self.base.history().load_history(&session)
    }

    /// The active knowledge source with credentials hidden.
    pub fn source(&self) -> KnowledgeSourceConfig {
        self.active.read().unwrap().config.redacted()
    }

    /// Validates, persists and activates a knowledge source. API keys sent
    /// back as the redaction placeholder keep their stored value.
    pub fn set_source(&self, mut config: KnowledgeSourceConfig) -> Result<KnowledgeSourceConfig> {
        let mut active = self.active.write().unwrap();
        restore_secrets(&mut config, &active.config)?;
        let handler = self.build(&config)?;
        let store = self.config.source_store_path();
        write_atomic(&store, &serde_json::to_string_pretty(&config)?)?;
        let shown = config.redacted();
        *active = ActiveSource { config, handler };
        Ok(shown)
    }

    /// Chunks a document into the live corpus, replacing any earlier version.
    pub fn ingest(&self, doc_id: &str, text: &str) -> Result<IngestReply> {
        if doc_id.is_empty() {
            return Err(BarkError::invalid("doc_id must not be empty"));
        }
        let chunks = chunk_document(doc_id, text, self.config.chunking)?;
        if chunks.is_empty() {
            return Err(BarkError::invalid("document text contains no words"));
        }
        let count = chunks.len();
        let path = self.config.corpus_index_path();
        let shared = self.shared_index(&path)?;
        let mut index = shared.write().unwrap();
        let replaced = index.contains_doc(doc_id);
        index.add(chunks)?;
        index.save(&path)?;
        Ok(IngestReply {
            doc_id: doc_id.to_string(),
            chunks: count,
            replaced,
        })
    }

    /// Removes a document from the live corpus. Unknown ids are a no-op.
    pub fn delete_document(&self, doc_id: &str) -> Result<usize> {
        let path = self.config.corpus_index_path();
        let shared = self.shared_index(&path)?;
        let mut index = shared.write().unwrap();
        let removed = index.remove(doc_id);
        if removed > 0 {
            index.save(&path)?;
        }
        Ok(removed)
    }
}

fn restore_secrets(
    config: &mut KnowledgeSourceConfig,
    previous: &KnowledgeSourceConfig,
) -> Result<()> {
    let known = previous.web_credentials();
    restore_in(config, &known)
}

fn restore_in(config: &mut KnowledgeSourceConfig, known: &[(&str, Option<&str>)]) -> Result<()> {
    match &mut config.settings {
        SourceSettings::WebSearch { endpoint, api_key } if api_key.as_deref() == Some(REDACTED) => {
            let stored = known
                .iter()
                .find(|(e, k)| *e == endpoint.as_str() && k.is_some())
                .and_then(|(_, k)| *k)
                .ok_or_else(|| {
                    BarkError::invalid(format!("no stored api_key for endpoint {endpoint}"))
                })?;
            *api_key = Some(stored.to_string());
        }
        SourceSettings::Composite { sources } => {
            for s in sources {
                restore_in(s, known)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let err = |e: std::io::Error| BarkError::cache(format!("writing {}: {e}", path.display()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(err)?;
    }
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, format!("{text}\n")).map_err(err)?;
    fs::rename(&tmp, path).map_err(err)
}
