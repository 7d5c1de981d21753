use std::sync::Arc;

use super::{last_user_message, Chunk, RagHandler};
use crate::cache::CacheService;
use crate::chatter::Chatter;
use crate::error::{BarkError, Result};
use crate::session::SessionLocks;
use crate::types::{ChatResponse, Message, PromptParameters, Role, SessionId};

/// Adds retrieval in front of another chatter.
///
/// The wrapped chatter's history, session locks and defaults are shared, so
/// the turn still persists the original prompt. Only the message list sent
/// onward carries the transformed prompt. Handler failures abort the turn
/// before any provider traffic.
pub struct RagChatter<C: ?Sized> {
    inner: Arc<C>,
    handler: Arc<dyn RagHandler>,
}

impl<C: Chatter + ?Sized> RagChatter<C> {
    pub fn new(inner: Arc<C>, handler: Arc<dyn RagHandler>) -> Self {
        Self { inner, handler }
    }

    pub fn inner(&self) -> &Arc<C> {
        &self.inner
    }

    pub fn handler(&self) -> &Arc<dyn RagHandler> {
        &self.handler
    }
}

impl<C: Chatter + ?Sized> Chatter for RagChatter<C> {
    fn defaults(&self) -> &PromptParameters {
        self.inner.defaults()
    }

    fn history(&self) -> &dyn CacheService {
        self.inner.history()
    }

    fn sessions(&self) -> &SessionLocks {
        self.inner.sessions()
    }

    fn respond(
        &self,
        session: &SessionId,
        params: &PromptParameters,
        messages: &[Message],
        chunks: &mut Vec<Chunk>,
    ) -> Result<ChatResponse> {
        last_user_message(messages)?;
        let found = self
            .handler
            .get_chunks(session, params, messages)
            .map_err(|e| match e {
                BarkError::Rag { .. } => e,
                other => BarkError::rag_from("retrieval handler", other),
            })?;
        for c in &found {
            c.validate()?;
        }
        let prompt = self
            .handler
            .transform_last_prompt(session, params, messages, &found);
        if prompt.role != Role::User {
            return Err(BarkError::rag(format!(
                "transformed prompt must be a user message, got {}",
                prompt.role
            )));
        }
        let mut outgoing = messages.to_vec();
        *outgoing.last_mut().expect("checked above") = prompt;
        chunks.extend(found);
        self.inner.respond(session, params, &outgoing, chunks)
    }
}
