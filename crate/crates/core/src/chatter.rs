//! The chatter abstraction: one `bark` is one chat turn within a session.
//!
//! A turn loads the session history, appends the prompt, asks
//! [`Chatter::respond`] for a reply and persists the user prompt and reply
//! together. Failures leave the history untouched. Decorators such as
//! [`crate::rag::RagChatter`] wrap another chatter and override `respond`.

use std::sync::Arc;
use std::thread::JoinHandle;

use crate::cache::{CacheService, ResponseCacheKey};
use crate::error::{BarkError, Result};
use crate::providers::Provider;
use crate::rag::Chunk;
use crate::session::{SessionLocks, Ticket};
use crate::types::{ChatResponse, Message, PromptParameters, Role, SessionId};

/// Outcome of a turn, with the retrieved context that shaped it.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub response: ChatResponse,
    pub chunks: Vec<Chunk>,
}

pub trait Chatter: Send + Sync {
    /// Parameters used when a call passes none.
    fn defaults(&self) -> &PromptParameters;

    fn history(&self) -> &dyn CacheService;

    fn sessions(&self) -> &SessionLocks;

    /// Produces a reply for an assembled conversation. Implementations record
    /// any retrieved context in `chunks`.
    fn respond(
        &self,
        session: &SessionId,
        params: &PromptParameters,
        messages: &[Message],
        chunks: &mut Vec<Chunk>,
    ) -> Result<ChatResponse>;

    /// `[System(system_prompt)?] ++ history ++ [User(prompt)]`
    fn assemble_messages(
        &self,
        session: &SessionId,
        prompt: &str,
        params: &PromptParameters,
    ) -> Result<Vec<Message>> {
        let history = self.history().load_history(session)?;
        let mut messages = Vec::with_capacity(history.len() + 2);
        if let Some(system) = &params.system_prompt {
            messages.push(Message::system(system.as_str()));
        }
        messages.extend(history);
        messages.push(Message::user(prompt));
        Ok(messages)
    }

    fn bark(
        &self,
        session: &SessionId,
        prompt: &str,
        params: Option<&PromptParameters>,
    ) -> Result<ChatResponse> {
        self.bark_turn(session, prompt, params).map(|t| t.response)
    }

    fn bark_turn(
        &self,
        session: &SessionId,
        prompt: &str,
        params: Option<&PromptParameters>,
    ) -> Result<Turn> {
        self.bark_queued(self.sessions().ticket(session), session, prompt, params)
    }

    /// Runs a turn once `ticket` comes up in the session queue.
    fn bark_queued(
        &self,
        ticket: Ticket,
        session: &SessionId,
        prompt: &str,
        params: Option<&PromptParameters>,
    ) -> Result<Turn> {
        if prompt.is_empty() {
            return Err(BarkError::invalid("prompt must not be empty"));
        }
        let params = params.unwrap_or_else(|| self.defaults());
        params.validate()?;

        let _guard = ticket.wait();
        let messages = self.assemble_messages(session, prompt, params)?;
        let user = messages
            .last()
            .cloned()
            .expect("assembled turn ends with the prompt");
        let mut chunks = Vec::new();
        let response = self.respond(session, params, &messages, &mut chunks)?;
        if response.text.is_empty() {
            return Err(BarkError::serialization("provider returned empty content"));
        }
        let assistant = Message::assistant(response.text.as_str());
        self.history().append_turn(session, &user, &assistant)?;
        Ok(Turn { response, chunks })
    }
}

/// A chatter backed directly by a [`Provider`].
pub struct ProviderChatter {
    provider: Arc<dyn Provider>,
    cache: Arc<dyn CacheService>,
    defaults: PromptParameters,
    sessions: SessionLocks,
    cache_responses: bool,
}

impl ProviderChatter {
    pub fn new(
        provider: Arc<dyn Provider>,
        cache: Arc<dyn CacheService>,
        defaults: PromptParameters,
    ) -> Self {
        Self {
            provider,
            cache,
            defaults,
            sessions: SessionLocks::new(),
            cache_responses: false,
        }
    }

    /// Serves identical calls from the response cache. Off by default.
    pub fn with_response_cache(mut self, enabled: bool) -> Self {
        self.cache_responses = enabled;
        self
    }

    pub fn provider(&self) -> &Arc<dyn Provider> {
        &self.provider
    }

    pub fn cache(&self) -> &Arc<dyn CacheService> {
        &self.cache
    }
}

impl Chatter for ProviderChatter {
    fn defaults(&self) -> &PromptParameters {
        &self.defaults
    }

    fn history(&self) -> &dyn CacheService {
        self.cache.as_ref()
    }

    fn sessions(&self) -> &SessionLocks {
        &self.sessions
    }

    fn respond(
        &self,
        _session: &SessionId,
        params: &PromptParameters,
        messages: &[Message],
        _chunks: &mut Vec<Chunk>,
    ) -> Result<ChatResponse> {
        if !self.cache_responses {
            return self.provider.complete(messages, params);
        }
        let key = ResponseCacheKey::compute(
            self.provider.kind(),
            self.provider.base_url(),
            params,
            messages,
        );
        if let Some(hit) = self.cache.response_get(&key)? {
            return Ok(hit);
        }
        let response = self.provider.complete(messages, params)?;
        self.cache.response_put(&key, &response)?;
        Ok(response)
    }
}

/// Receives the outcome of an asynchronous turn. Exactly one method is
/// called, exactly once, on a background thread.
pub trait BarkCallback: Send + 'static {
    fn on_response(self: Box<Self>, response: ChatResponse);
    fn on_error(self: Box<Self>, error: BarkError);
}

impl<F> BarkCallback for F
where
    F: FnOnce(Result<ChatResponse>) + Send + 'static,
{
    fn on_response(self: Box<Self>, response: ChatResponse) {
        (*self)(Ok(response))
    }

    fn on_error(self: Box<Self>, error: BarkError) {
        (*self)(Err(error))
    }
}

/// Handle to an in-flight asynchronous turn.
#[derive(Debug)]
pub struct BarkHandle {
    thread: JoinHandle<()>,
}

impl BarkHandle {
    pub fn is_finished(&self) -> bool {
        self.thread.is_finished()
    }

    /// Waits until the callback has returned.
    pub fn join(self) {
        if let Err(panic) = self.thread.join() {
            std::panic::resume_unwind(panic);
        }
    }
}

pub trait BarkAsync {
    /// Starts a turn and returns at once. The turn's place in the session
    /// queue is fixed here, so async turns on one session complete in the
    /// order they were started. Every failure, including invalid input, is
    /// delivered to `callback.on_error`.
    fn bark_async<CB: BarkCallback>(
        &self,
        session: &SessionId,
        prompt: impl Into<String>,
        params: Option<PromptParameters>,
        callback: CB,
    ) -> BarkHandle;
}

impl<C: Chatter + ?Sized + 'static> BarkAsync for Arc<C> {
    fn bark_async<CB: BarkCallback>(
        &self,
        session: &SessionId,
        prompt: impl Into<String>,
        params: Option<PromptParameters>,
        callback: CB,
    ) -> BarkHandle {
        let ticket = self.sessions().ticket(session);
        let chatter = Arc::clone(self);
        let session = session.clone();
        let prompt = prompt.into();
        let callback: Box<dyn BarkCallback> = Box::new(callback);
        let thread = std::thread::spawn(move || {
            match chatter.bark_queued(ticket, &session, &prompt, params.as_ref()) {
                Ok(turn) => callback.on_response(turn.response),
                Err(err) => callback.on_error(err),
            }
        });
        BarkHandle { thread }
    }
}

/// True when every message alternates User, Assistant starting with User.
pub fn strictly_alternating(history: &[Message]) -> bool {
    history.iter().enumerate().all(|(i, m)| {
        m.role
            == if i % 2 == 0 {
                Role::User
            } else {
                Role::Assistant
            }
    })
}
