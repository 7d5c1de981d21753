//! User-facing knowledge source configuration.
//!
//! ```json
//! {"kind": "keyword_corpus", "top_k": 4, "template": "...", "settings": {"index_path": "corpus.json"}}
//! {"kind": "web_search", "settings": {"endpoint": "http://...", "api_key": "..."}}
//! {"kind": "composite", "settings": {"sources": [ ... ]}}
//! {"kind": "none"}
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    CompositeHandler, KeywordHandler, PromptTemplate, RagHandler, SharedIndex, WebSearchHandler,
};
use crate::error::{BarkError, Result};

pub const DEFAULT_TOP_K: usize = 4;

/// Placeholder shown instead of API keys.
pub const REDACTED: &str = "[REDACTED]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    None,
    KeywordCorpus,
    WebSearch,
    Composite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSettings {
    None,
    KeywordCorpus {
        index_path: PathBuf,
    },
    WebSearch {
        endpoint: String,
        api_key: Option<String>,
    },
    Composite {
        sources: Vec<KnowledgeSourceConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSourceConfig", into = "RawSourceConfig")]
pub struct KnowledgeSourceConfig {
    pub top_k: usize,
    pub template: PromptTemplate,
    pub settings: SourceSettings,
}

#[derive(Serialize, Deserialize)]
struct RawSourceConfig {
    kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    top_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    template: Option<String>,
    #[serde(default)]
    settings: Value,
}

fn str_setting(settings: &Value, key: &str, kind: &str) -> Result<String> {
    match settings.get(key).and_then(Value::as_str) {
        Some(s) if !s.is_empty() => Ok(s.to_string()),
        _ => Err(BarkError::invalid(format!(
            "{kind} source requires settings.{key}"
        ))),
    }
}

impl TryFrom<RawSourceConfig> for KnowledgeSourceConfig {
    type Error = BarkError;

    fn try_from(raw: RawSourceConfig) -> Result<Self> {
        let top_k = raw.top_k.unwrap_or(DEFAULT_TOP_K);
        if top_k == 0 {
            return Err(BarkError::invalid("top_k must be at least 1"));
        }
        let template = match raw.template {
            Some(t) => PromptTemplate::new(t)?,
            None => PromptTemplate::default(),
        };
        let s = &raw.settings;
        let settings = match raw.kind {
            SourceKind::None => SourceSettings::None,
            SourceKind::KeywordCorpus => SourceSettings::KeywordCorpus {
                index_path: str_setting(s, "index_path", "keyword_corpus")?.into(),
            },
            SourceKind::WebSearch => {
                let endpoint = str_setting(s, "endpoint", "web_search")?;
                if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
                    return Err(BarkError::invalid(
                        "web_search endpoint must be an http(s) URL",
                    ));
                }
                SourceSettings::WebSearch {
                    endpoint,
                    api_key: s.get("api_key").and_then(Value::as_str).map(str::to_string),
                }
            }
            SourceKind::Composite => {
                let sources: Vec<KnowledgeSourceConfig> =
                    serde_json::from_value(s.get("sources").cloned().unwrap_or(Value::Null))
                        .map_err(|e| {
                            BarkError::invalid(format!("composite settings.sources: {e}"))
                        })?;
                if sources.is_empty() {
                    return Err(BarkError::invalid(
                        "composite source needs at least one inner source",
                    ));
                }
                if sources.iter().any(|c| c.kind() == SourceKind::None) {
                    return Err(BarkError::invalid(
                        "composite sources cannot include kind none",
                    ));
                }
                SourceSettings::Composite { sources }
            }
        };
        Ok(Self {
            top_k,
            template,
            settings,
        })
    }
}

impl From<KnowledgeSourceConfig> for RawSourceConfig {
    fn from(cfg: KnowledgeSourceConfig) -> Self {
        let kind = cfg.kind();
        let settings = match cfg.settings {
            SourceSettings::None => json!({}),
            SourceSettings::KeywordCorpus { index_path } => {
                json!({"index_path": index_path.to_string_lossy()})
            }
            SourceSettings::WebSearch { endpoint, api_key } => match api_key {
                Some(key) => json!({"endpoint": endpoint, "api_key": key}),
                None => json!({"endpoint": endpoint}),
            },
            SourceSettings::Composite { sources } => {
                json!({"sources": serde_json::to_value(sources).expect("serializable")})
            }
        };
        RawSourceConfig {
            kind,
            top_k: Some(cfg.top_k),
            template: Some(cfg.template.into()),
            settings,
        }
    }
}

impl Default for KnowledgeSourceConfig {
    fn default() -> Self {
        Self::none()
    }
}

impl KnowledgeSourceConfig {
    pub fn none() -> Self {
        Self {
            top_k: DEFAULT_TOP_K,
            template: PromptTemplate::default(),
            settings: SourceSettings::None,
        }
    }

    pub fn keyword_corpus(index_path: impl Into<PathBuf>) -> Self {
        Self {
            settings: SourceSettings::KeywordCorpus {
                index_path: index_path.into(),
            },
            ..Self::none()
        }
    }

    pub fn web_search(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            settings: SourceSettings::WebSearch {
                endpoint: endpoint.into(),
                api_key,
            },
            ..Self::none()
        }
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k.max(1);
        self
    }

    pub fn kind(&self) -> SourceKind {
        match self.settings {
            SourceSettings::None => SourceKind::None,
            SourceSettings::KeywordCorpus { .. } => SourceKind::KeywordCorpus,
            SourceSettings::WebSearch { .. } => SourceKind::WebSearch,
            SourceSettings::Composite { .. } => SourceKind::Composite,
        }
    }

    /// Copy with every API key replaced by a placeholder.
    pub fn redacted(&self) -> Self {
        let settings = match &self.settings {
            SourceSettings::WebSearch { endpoint, api_key } => SourceSettings::WebSearch {
                endpoint: endpoint.clone(),
                api_key: api_key.as_ref().map(|_| REDACTED.to_string()),
            },
            SourceSettings::Composite { sources } => SourceSettings::Composite {
                sources: sources.iter().map(Self::redacted).collect(),
            },
            other => other.clone(),
        };
        Self {
            settings,
            ..self.clone()
        }
    }

    /// Every `(endpoint, api_key)` pair of the web-search sources, depth first.
    pub fn web_credentials(&self) -> Vec<(&str, Option<&str>)> {
        match &self.settings {
            SourceSettings::WebSearch { endpoint, api_key } => {
                vec![(endpoint.as_str(), api_key.as_deref())]
            }
            SourceSettings::Composite { sources } => {
                sources.iter().flat_map(Self::web_credentials).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Every keyword index path referenced, depth first.
    pub fn index_paths(&self) -> Vec<&Path> {
        match &self.settings {
            SourceSettings::KeywordCorpus { index_path } => vec![index_path.as_path()],
            SourceSettings::Composite { sources } => {
                sources.iter().flat_map(Self::index_paths).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Builds the handler. `None` for kind none. Keyword indexes are obtained
    /// through `resolve_index` so callers can share live indexes.
    pub fn build_handler(
        &self,
        resolve_index: &mut dyn FnMut(&Path) -> Result<SharedIndex>,
    ) -> Result<Option<Arc<dyn RagHandler>>> {
        let handler: Arc<dyn RagHandler> = match &self.settings {
            SourceSettings::None => return Ok(None),
            SourceSettings::KeywordCorpus { index_path } => Arc::new(
                KeywordHandler::new(resolve_index(index_path)?)
                    .with_top_k(self.top_k)
                    .with_template(self.template.clone()),
            ),
            SourceSettings::WebSearch { endpoint, api_key } => {
                let mut h = WebSearchHandler::new(endpoint.clone())
                    .with_top_k(self.top_k)
                    .with_template(self.template.clone());
                if let Some(key) = api_key {
                    h = h.with_api_key(key.clone());
                }
                Arc::new(h)
            }
            SourceSettings::Composite { sources } => {
                let mut inner = Vec::with_capacity(sources.len());
                for cfg in sources {
                    if let Some(h) = cfg.build_handler(resolve_index)? {
                        inner.push(h);
                    }
                }
                Arc::new(
                    CompositeHandler::new(inner)?
                        .with_top_k(self.top_k)
                        .with_template(self.template.clone()),
                )
            }
        };
        Ok(Some(handler))
    }
}
