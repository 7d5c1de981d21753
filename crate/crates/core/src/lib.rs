//! Vendor-neutral chat over sessions.
//!
//! A [`Chatter`] runs one chat turn per [`Chatter::bark`]: it loads the
//! session history from a [`CacheService`], sends the conversation through a
//! pluggable [`Provider`], and records the prompt and reply. Retrieval is
//! layered on with [`rag::RagChatter`], which wraps any chatter with a
//! [`rag::RagHandler`], including BM25 keyword search from [`retrieval`].
//!
//! ```no_run
//! use std::sync::Arc;
//! use kennel_core::{Chatter, MemoryCache, MockProvider, PromptParameters, ProviderChatter, SessionId};
//!
//! let chatter = ProviderChatter::new(
//!     Arc::new(MockProvider::echo()),
//!     Arc::new(MemoryCache::new()),
//!     PromptParameters::new("any-model"),
//! );
//! let reply = chatter.bark(&SessionId::new("demo")?, "hi", None)?;
//! assert_eq!(reply.text, "echo: hi");
//! # Ok::<_, kennel_core::BarkError>(())
//! ```

pub mod cache;
pub mod chatter;
pub mod error;
pub mod providers;
pub mod rag;
pub mod retrieval;
pub mod session;
#[cfg(feature = "testing")]
pub mod testing;
pub mod types;

pub use cache::{CacheService, FileSystemCache, MemoryCache, ResponseCacheKey, SessionRecord};
pub use chatter::{BarkAsync, BarkCallback, BarkHandle, Chatter, ProviderChatter, Turn};
pub use error::{BarkError, ErrorKind, Result};
pub use providers::{
    HttpProvider, MockProvider, MockReply, Provider, ProviderConfig, ProviderKind, RetryPolicy,
};
pub use types::{ChatResponse, FinishReason, Message, PromptParameters, Role, SessionId, Usage};
