//! Deterministic offline provider.
//!
//! Without a script it echoes the last user message as `echo: {content}`.
//! A script is consumed in order and its last entry repeats once exhausted.
//! Replies are rendered as chat-completions bodies and run through the same
//! parser as a real endpoint.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::json;

use super::{openai, Provider, ProviderKind};
use crate::error::{BarkError, Result};
use crate::types::{ChatResponse, Message, PromptParameters, Role};

#[derive(Debug, Clone, PartialEq)]
pub enum MockReply {
    Text(String),
    Fail(BarkError),
}

impl From<&str> for MockReply {
    fn from(s: &str) -> Self {
        MockReply::Text(s.to_string())
    }
}

impl From<String> for MockReply {
    fn from(s: String) -> Self {
        MockReply::Text(s)
    }
}

#[derive(Debug, Default)]
pub struct MockProvider {
    script: Vec<MockReply>,
    cursor: Mutex<usize>,
    calls: AtomicUsize,
    received: Mutex<Vec<Vec<Message>>>,
    latency: Option<Duration>,
}

impl MockProvider {
    pub fn echo() -> Self {
        Self::default()
    }

    pub fn scripted<I, R>(replies: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: Into<MockReply>,
    {
        Self {
            script: replies.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    /// Sleeps this long before every reply.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Every message list this provider has been asked to complete.
    pub fn received(&self) -> Vec<Vec<Message>> {
        self.received.lock().unwrap().clone()
    }

    pub fn last_received(&self) -> Option<Vec<Message>> {
        self.received.lock().unwrap().last().cloned()
    }

    fn next_reply(&self, messages: &[Message]) -> MockReply {
        if self.script.is_empty() {
            let last_user = messages
                .iter()
                .rev()
                .find(|m| m.role == Role::User)
                .map(|m| m.content.as_str())
                .unwrap_or_default();
            return MockReply::Text(format!("echo: {last_user}"));
        }
        let mut cursor = self.cursor.lock().unwrap();
        let idx = (*cursor).min(self.script.len() - 1);
        *cursor += 1;
        self.script[idx].clone()
    }
}

impl Provider for MockProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn base_url(&self) -> &str {
        "mock://"
    }

    fn complete(&self, messages: &[Message], params: &PromptParameters) -> Result<ChatResponse> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.received.lock().unwrap().push(messages.to_vec());
        if let Some(latency) = self.latency {
            std::thread::sleep(latency);
        }
        match self.next_reply(messages) {
            MockReply::Fail(err) => Err(err),
            MockReply::Text(text) => {
                let model = if params.model.is_empty() {
                    "mock"
                } else {
                    params.model.as_str()
                };
                let body = json!({
                    "id": "mock",
                    "object": "chat.completion",
                    "model": model,
                    "choices": [{
                        "index": 0,
                        "message": {"role": "assistant", "content": text},
                        "finish_reason": "stop"
                    }]
                });
                openai::parse_response(&body.to_string())
            }
        }
    }
}
