//! Offline test helpers: a recording HTTP stub server and the provider
//! fixture format.
//!
//! Fixture files (`fixtures/providers/*.json`) look like
//!
//! ```json
//! {"kind": "openai", "headers": {...}, "input": {"messages": [...], "params": {...}},
//!  "request": {...}, "response": {...},
//!  "expect": {"text": "...", "finish_reason": "stop", "usage": {...} | null}}
//! ```

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use indexmap::IndexMap;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{BarkError, Result};
use crate::providers::ProviderKind;
use crate::types::{Message, PromptParameters, Role, Usage};

#[derive(Debug, Clone)]
pub struct RecordedRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl RecordedRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct StubReply {
    pub status: u16,
    pub body: String,
}

impl StubReply {
    pub fn ok(body: impl Into<String>) -> Self {
        Self {
            status: 200,
            body: body.into(),
        }
    }

    pub fn status(status: u16, body: impl Into<String>) -> Self {
        Self {
            status,
            body: body.into(),
        }
    }
}

#[derive(Default)]
struct StubState {
    queue: VecDeque<StubReply>,
    fallback: Option<StubReply>,
    requests: Vec<RecordedRequest>,
}

/// Serves queued replies in order, then repeats the fallback (404 if none).
/// Every request is recorded.
pub struct StubServer {
    server: Arc<tiny_http::Server>,
    state: Arc<Mutex<StubState>>,
    addr: String,
    worker: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start() -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind stub server"));
        let addr = server
            .server_addr()
            .to_ip()
            .expect("tcp listener")
            .to_string();
        let state: Arc<Mutex<StubState>> = Arc::default();
        let worker = {
            let server = server.clone();
            let state = state.clone();
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let mut body = String::new();
                    let _ = request.as_reader().read_to_string(&mut body);
                    let recorded = RecordedRequest {
                        method: request.method().to_string(),
                        path: request.url().to_string(),
                        headers: request
                            .headers()
                            .iter()
                            .map(|h| (h.field.to_string(), h.value.to_string()))
                            .collect(),
                        body,
                    };
                    let reply = {
                        let mut st = state.lock().unwrap();
                        st.requests.push(recorded);
                        st.queue
                            .pop_front()
                            .or_else(|| st.fallback.clone())
                            .unwrap_or_else(|| StubReply::status(404, "no stub reply"))
                    };
                    let header =
                        tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                    let response = tiny_http::Response::from_string(reply.body)
                        .with_status_code(reply.status)
                        .with_header(header);
                    let _ = request.respond(response);
                }
            })
        };
        Self {
            server,
            state,
            addr,
            worker: Some(worker),
        }
    }

    pub fn with_reply(self, reply: StubReply) -> Self {
        self.push(reply);
        self
    }

    pub fn with_fallback(self, reply: StubReply) -> Self {
        self.state.lock().unwrap().fallback = Some(reply);
        self
    }

    pub fn push(&self, reply: StubReply) {
        self.state.lock().unwrap().queue.push_back(reply);
    }

    /// `http://127.0.0.1:{port}`
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.lock().unwrap().requests.clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

/// A `host:port` nothing is listening on.
pub fn closed_port_url() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}

#[derive(Debug, Clone, Deserialize)]
pub struct FixtureMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FixtureInput {
    pub messages: Vec<FixtureMessage>,
    pub params: PromptParameters,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FixtureExpect {
    pub text: String,
    pub finish_reason: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ProviderFixture {
    #[serde(skip)]
    pub name: String,
    pub kind: ProviderKind,
    #[serde(default)]
    pub headers: IndexMap<String, String>,
    pub input: FixtureInput,
    pub request: Value,
    pub response: Value,
    pub expect: FixtureExpect,
}

impl ProviderFixture {
    pub fn messages(&self) -> Vec<Message> {
        self.input
            .messages
            .iter()
            .map(|m| Message::new(m.role, m.content.as_str()))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BarkError::invalid(format!("{}: {e}", path.display())))?;
        let mut fx: ProviderFixture = serde_json::from_str(&text)?;
        fx.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(fx)
    }

    /// Every `*.json` in `dir`, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| BarkError::invalid(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        paths.iter().map(|p| Self::load(p)).collect()
    }
}

/// `{workspace}/fixtures`
pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
