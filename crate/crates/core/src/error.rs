//! The unified error model for every chat turn.

use thiserror::Error;

/// Everything that can go wrong while barking.
///
/// Only [`BarkError::Network`] and [`BarkError::Provider`] with status 408, 429
/// or 5xx are retryable; a [`BarkError::Rag`] is retryable exactly when the
/// failure it wraps is.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BarkError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("network error: {0}")]
    Network(String),

    #[error("provider returned HTTP {status}: {body}")]
    Provider { status: u16, body: String },

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("retrieval failed: {message}")]
    Rag {
        message: String,
        source: Option<Box<BarkError>>,
    },

    #[error("cache error: {0}")]
    Cache(String),
}

/// Discriminant of a [`BarkError`], used for wire-level error bodies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    InvalidInput,
    Network,
    Provider,
    Serialization,
    Rag,
    Cache,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::InvalidInput => "invalid_input",
            ErrorKind::Network => "network",
            ErrorKind::Provider => "provider",
            ErrorKind::Serialization => "serialization",
            ErrorKind::Rag => "rag",
            ErrorKind::Cache => "cache",
        }
    }
}

impl BarkError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        BarkError::InvalidInput(msg.into())
    }

    pub fn serialization(msg: impl Into<String>) -> Self {
        BarkError::Serialization(msg.into())
    }

    pub fn cache(msg: impl Into<String>) -> Self {
        BarkError::Cache(msg.into())
    }

    pub fn rag(msg: impl Into<String>) -> Self {
        BarkError::Rag {
            message: msg.into(),
            source: None,
        }
    }

    /// Wraps another failure as a retrieval error, keeping it reachable for
    /// retryability checks.
    pub fn rag_from(msg: impl Into<String>, inner: BarkError) -> Self {
        let message = format!("{}: {inner}", msg.into());
        BarkError::Rag {
            message,
            source: Some(Box::new(inner)),
        }
    }

    /// Builds a provider error. Status codes outside `[100, 599]` are clamped
    /// into a 5xx so the variant invariant always holds.
    pub fn provider(status: u16, body: impl Into<String>) -> Self {
        let status = if (100..=599).contains(&status) {
            status
        } else {
            502
        };
        BarkError::Provider {
            status,
            body: body.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            BarkError::InvalidInput(_) => ErrorKind::InvalidInput,
            BarkError::Network(_) => ErrorKind::Network,
            BarkError::Provider { .. } => ErrorKind::Provider,
            BarkError::Serialization(_) => ErrorKind::Serialization,
            BarkError::Rag { .. } => ErrorKind::Rag,
            BarkError::Cache(_) => ErrorKind::Cache,
        }
    }

    pub fn retryable(&self) -> bool {
        match self {
            BarkError::Network(_) => true,
            BarkError::Provider { status, .. } => {
                matches!(status, 408 | 429) || (500..=599).contains(status)
            }
            BarkError::Rag {
                source: Some(inner),
                ..
            } => inner.retryable(),
            _ => false,
        }
    }

    /// Replaces every occurrence of `secret` in the error text.
    pub fn redact(self, secret: Option<&str>) -> Self {
        let Some(secret) = secret.filter(|s| !s.is_empty()) else {
            return self;
        };
        let scrub = |s: String| s.replace(secret, "[REDACTED]");
        match self {
            BarkError::InvalidInput(m) => BarkError::InvalidInput(scrub(m)),
            BarkError::Network(m) => BarkError::Network(scrub(m)),
            BarkError::Provider { status, body } => BarkError::Provider {
                status,
                body: scrub(body),
            },
            BarkError::Serialization(m) => BarkError::Serialization(scrub(m)),
            BarkError::Rag { message, source } => BarkError::Rag {
                message: scrub(message),
                source: source.map(|inner| Box::new(inner.redact(Some(secret)))),
            },
            BarkError::Cache(m) => BarkError::Cache(scrub(m)),
        }
    }
}

impl From<serde_json::Error> for BarkError {
    fn from(err: serde_json::Error) -> Self {
        BarkError::Serialization(err.to_string())
    }
}

pub type Result<T, E = BarkError> = std::result::Result<T, E>;
