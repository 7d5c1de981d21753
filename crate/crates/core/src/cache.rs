//! Conversation history and response caching.
//!
//! The file-system layout under a cache directory is
//!
//! ```text
//! {cache_dir}/sessions/{enc(session_id)}.jsonl   one {role, content, created_at} per line
//! {cache_dir}/responses/{digest}.json            {stored_at, response}
//! ```
//!
//! where `enc` percent-encodes every byte outside `[A-Za-z0-9._-]`.
//! Cross-process locking is not provided: one cache instance per directory.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{BarkError, Result};
use crate::providers::ProviderKind;
use crate::types::{ChatResponse, Message, PromptParameters, Role, SessionId};

/// Ordered User/Assistant history of one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: SessionId,
    pub messages: Vec<Message>,
}

impl SessionRecord {
    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.messages.iter().enumerate() {
            check_next_role(i, m.role)?;
        }
        Ok(())
    }
}

/// Position `i` in a history must hold User when even, Assistant when odd.
fn check_next_role(position: usize, role: Role) -> Result<()> {
    let expected = if position % 2 == 0 {
        Role::User
    } else {
        Role::Assistant
    };
    if role != expected {
        return Err(BarkError::cache(format!(
            "history alternation violated at position {position}: expected {expected}, got {role}"
        )));
    }
    Ok(())
}

/// SHA-256 of the canonical JSON describing one provider call.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResponseCacheKey(String);

impl ResponseCacheKey {
    /// Timestamps are excluded: only role and content of each message count.
    pub fn compute(
        kind: ProviderKind,
        base_url: &str,
        params: &PromptParameters,
        messages: &[Message],
    ) -> Self {
        let mut doc = Map::new();
        doc.insert("kind".into(), Value::from(kind.as_str()));
        doc.insert("base_url".into(), Value::from(base_url));
        doc.insert("model".into(), Value::from(params.model.as_str()));
        let opt_f64 = |x: Option<f64>| x.map(Value::from).unwrap_or(Value::Null);
        doc.insert("temperature".into(), opt_f64(params.temperature));
        doc.insert("top_p".into(), opt_f64(params.top_p));
        doc.insert(
            "max_tokens".into(),
            params.max_tokens.map(Value::from).unwrap_or(Value::Null),
        );
        doc.insert(
            "system_prompt".into(),
            params
                .system_prompt
                .as_deref()
                .map(Value::from)
                .unwrap_or(Value::Null),
        );
        doc.insert(
            "extra".into(),
            Value::Object(
                params
                    .extra
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
            ),
        );
        doc.insert(
            "messages".into(),
            Value::Array(
                messages
                    .iter()
                    .map(|m| {
                        let mut obj = Map::new();
                        obj.insert("role".into(), Value::from(m.role.as_str()));
                        obj.insert("content".into(), Value::from(m.content.as_str()));
                        Value::Object(obj)
                    })
                    .collect(),
            ),
        );
        let canonical = canonical_json(&Value::Object(doc));
        Self(hex::encode(Sha256::digest(canonical.as_bytes())))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Serializes with object keys sorted at every level and no whitespace.
pub fn canonical_json(value: &Value) -> String {
    fn sorted(value: &Value) -> Value {
        match value {
            Value::Object(map) => {
                let mut keys: Vec<_> = map.keys().collect();
                keys.sort();
                Value::Object(
                    keys.into_iter()
                        .map(|k| (k.clone(), sorted(&map[k])))
                        .collect(),
                )
            }
            Value::Array(items) => Value::Array(items.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    sorted(value).to_string()
}

/// Percent-encodes every byte outside `[A-Za-z0-9._-]`.
pub fn encode_session_id(id: &SessionId) -> String {
    let mut out = String::with_capacity(id.as_str().len());
    for b in id.as_str().bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Result of reading a history file, including any incomplete final line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryLoad {
    pub messages: Vec<Message>,
    pub torn_tail: Option<String>,
}

pub trait CacheService: Send + Sync {
    fn load_history(&self, session: &SessionId) -> Result<Vec<Message>>;

    fn append_message(&self, session: &SessionId, message: &Message) -> Result<()>;

    /// Persists a user prompt and its reply. Implementations should make the
    /// pair all-or-nothing.
    fn append_turn(&self, session: &SessionId, user: &Message, assistant: &Message) -> Result<()> {
        self.append_message(session, user)?;
        self.append_message(session, assistant)
    }

    fn response_get(&self, key: &ResponseCacheKey) -> Result<Option<ChatResponse>>;

    fn response_put(&self, key: &ResponseCacheKey, response: &ChatResponse) -> Result<()>;
}

/// Process-local cache, mostly for tests and throwaway chatters.
#[derive(Debug, Default)]
pub struct MemoryCache {
    sessions: Mutex<HashMap<SessionId, Vec<Message>>>,
    responses: Mutex<HashMap<ResponseCacheKey, ChatResponse>>,
}

impl MemoryCache {
    pub fn new() -> Self {
        Self::default()
    }
}

impl CacheService for MemoryCache {
    fn load_history(&self, session: &SessionId) -> Result<Vec<Message>> {
        Ok(self
            .sessions
            .lock()
            .unwrap()
            .get(session)
            .cloned()
            .unwrap_or_default())
    }

    fn append_message(&self, session: &SessionId, message: &Message) -> Result<()> {
        let mut sessions = self.sessions.lock().unwrap();
        let history = sessions.entry(session.clone()).or_default();
        check_next_role(history.len(), message.role)?;
        history.push(message.clone());
        Ok(())
    }

    fn append_turn(&self, session: &SessionId, user: &Message, assistant: &Message) -> Result<()> {
        let mut sessions = self.sessions.lock().unwrap();
        let history = sessions.entry(session.clone()).or_default();
        check_next_role(history.len(), user.role)?;
        check_next_role(history.len() + 1, assistant.role)?;
        history.push(user.clone());
        history.push(assistant.clone());
        Ok(())
    }

    fn response_get(&self, key: &ResponseCacheKey) -> Result<Option<ChatResponse>> {
        Ok(self.responses.lock().unwrap().get(key).cloned())
    }

    fn response_put(&self, key: &ResponseCacheKey, response: &ChatResponse) -> Result<()> {
        self.responses
            .lock()
            .unwrap()
            .insert(key.clone(), response.clone());
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct StoredResponse {
    stored_at: u64,
    response: ChatResponse,
}

fn io_err(context: &str, path: &Path, err: std::io::Error) -> BarkError {
    BarkError::cache(format!("{context} {}: {err}", path.display()))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// File-backed cache of session histories and model responses.
#[derive(Debug)]
pub struct FileSystemCache {
    root: PathBuf,
    ttl: Option<Duration>,
    file_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    tmp_counter: AtomicU64,
}

impl FileSystemCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["sessions", "responses"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| io_err("creating", &dir, e))?;
        }
        Ok(Self {
            root,
            ttl: None,
            file_locks: Mutex::new(HashMap::new()),
            tmp_counter: AtomicU64::new(0),
        })
    }

    /// Response entries older than `ttl` are treated as absent.
    pub fn with_ttl(mut self, ttl: Duration) -> Self {
        self.ttl = Some(ttl);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_path(&self, session: &SessionId) -> PathBuf {
        self.root
            .join("sessions")
            .join(format!("{}.jsonl", encode_session_id(session)))
    }

    fn response_path(&self, key: &ResponseCacheKey) -> PathBuf {
        self.root
            .join("responses")
            .join(format!("{}.json", key.as_str()))
    }

    fn lock_for(&self, session: &SessionId) -> Arc<Mutex<()>> {
        self.file_locks
            .lock()
            .unwrap()
            .entry(session.as_str().to_string())
            .or_default()
            .clone()
    }

    /// Reads a history without modifying the file.
    pub fn read_history(&self, session: &SessionId) -> Result<HistoryLoad> {
        let path = self.session_path(session);
        let mut bytes = Vec::new();
        match File::open(&path) {
            Ok(mut f) => {
                f.read_to_end(&mut bytes)
                    .map_err(|e| io_err("reading", &path, e))?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok(HistoryLoad {
                    messages: Vec::new(),
                    torn_tail: None,
                })
            }
            Err(e) => return Err(io_err("opening", &path, e)),
        }
        parse_history(&path, &bytes).map(|(load, _)| load)
    }

    /// Like [`CacheService::load_history`] but also reports a torn final line.
    /// The file is truncated back to its last complete record.
    pub fn load_history_report(&self, session: &SessionId) -> Result<HistoryLoad> {
        let lock = self.lock_for(session);
        let _guard = lock.lock().unwrap();
        self.load_and_repair(session)
    }

    fn load_and_repair(&self, session: &SessionId) -> Result<HistoryLoad> {
        let path = self.session_path(session);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok(HistoryLoad {
                    messages: Vec::new(),
                    torn_tail: None,
                })
            }
            Err(e) => return Err(io_err("reading", &path, e)),
        };
        let (load, good_len) = parse_history(&path, &bytes)?;
        if let Some(tail) = &load.torn_tail {
            tracing::warn!(
                path = %path.display(),
                tail_bytes = tail.len(),
                "dropping torn trailing history line"
            );
            let f = OpenOptions::new()
                .write(true)
                .open(&path)
                .map_err(|e| io_err("opening", &path, e))?;
            f.set_len(good_len as u64)
                .map_err(|e| io_err("truncating", &path, e))?;
        }
        Ok(load)
    }

    fn append_lines(&self, session: &SessionId, messages: &[&Message]) -> Result<()> {
        let lock = self.lock_for(session);
        let _guard = lock.lock().unwrap();
        let current = self.load_and_repair(session)?;
        for (offset, m) in messages.iter().enumerate() {
            check_next_role(current.messages.len() + offset, m.role)?;
        }
        let mut buf = String::new();
        for m in messages {
            buf.push_str(&serde_json::to_string(m)?);
            buf.push('\n');
        }
        let path = self.session_path(session);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err("opening", &path, e))?;
        f.write_all(buf.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(|e| io_err("appending to", &path, e))
    }
}

/// Returns the parsed messages and the byte length of the valid prefix.
fn parse_history(path: &Path, bytes: &[u8]) -> Result<(HistoryLoad, usize)> {
    let mut messages = Vec::new();
    let mut consumed = 0;
    let mut torn_tail = None;
    let mut rest = bytes;
    while !rest.is_empty() {
        let (line, complete) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], true),
            None => (rest, false),
        };
        let advance = line.len() + usize::from(complete);
        let is_last = advance == rest.len();
        let parsed = std::str::from_utf8(line)
            .ok()
            .and_then(|s| serde_json::from_str::<Message>(s).ok());
        match parsed {
            Some(m) if complete => {
                check_next_role(messages.len(), m.role)
                    .map_err(|e| BarkError::cache(format!("{}: {e}", path.display())))?;
                messages.push(m);
                consumed += advance;
            }
            _ if is_last => {
                torn_tail = Some(String::from_utf8_lossy(line).into_owned());
            }
            _ => {
                return Err(BarkError::cache(format!(
                    "{}: corrupt history line at byte {consumed}",
                    path.display()
                )))
            }
        }
        rest = &rest[advance..];
    }
    Ok((
        HistoryLoad {
            messages,
            torn_tail,
        },
        consumed,
    ))
}

impl CacheService for FileSystemCache {
    fn load_history(&self, session: &SessionId) -> Result<Vec<Message>> {
        self.load_history_report(session).map(|load| load.messages)
    }

    fn append_message(&self, session: &SessionId, message: &Message) -> Result<()> {
        self.append_lines(session, &[message])
    }

    fn append_turn(&self, session: &SessionId, user: &Message, assistant: &Message) -> Result<()> {
        self.append_lines(session, &[user, assistant])
    }

    fn response_get(&self, key: &ResponseCacheKey) -> Result<Option<ChatResponse>> {
        let path = self.response_path(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err("reading", &path, e)),
        };
        let stored: StoredResponse = serde_json::from_str(&text)
            .map_err(|e| BarkError::cache(format!("{}: {e}", path.display())))?;
        if let Some(ttl) = self.ttl {
            if unix_now().saturating_sub(stored.stored_at) >= ttl.as_secs() {
                return Ok(None);
            }
        }
        Ok(Some(stored.response))
    }

    fn response_put(&self, key: &ResponseCacheKey, response: &ChatResponse) -> Result<()> {
        let path = self.response_path(key);
        let tmp = path.with_extension(format!(
            "tmp-{}-{}",
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        let stored = StoredResponse {
            stored_at: unix_now(),
            response: response.clone(),
        };
        let body = serde_json::to_vec(&stored)?;
        let write = || -> std::io::Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(&body)?;
            f.sync_data()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            io_err("writing", &path, e)
        })
    }
}
