// SPDX-License-Identifier: Apache-2.0

//! Model completion backends.
//!
//! [`Backend`] is the single contract the agent and the dataset pipeline use to
//! obtain completions. [`HttpBackend`] speaks the chat-completion wire protocol
//! against any compatible server; [`MockBackend`] replays scripted responses.

mod http;
mod mock;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ChatMessage, Role};

pub use http::{HttpBackend, HttpBackendConfig, DEFAULT_COMPLETIONS_PATH};
pub use mock::{Matcher, MockBackend, MockReply, MockScript, MockScriptRule};

/// Env var overriding the configured backend URL.
pub const BACKEND_URL_ENV: &str = "NETCFG_BACKEND_URL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("[{request_id}] transport error: {message}")]
    Transport { request_id: String, message: String },
    #[error("[{request_id}] protocol error: {message}")]
    Protocol { request_id: String, message: String },
    #[error("[{request_id}] timed out after {timeout:?}")]
    Timeout { request_id: String, timeout: Duration },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("duplicate mock rule: {0}")]
    DuplicateRule(String),
    #[error("mock script error: {0}")]
    Script(String),
}

impl BackendError {
    pub fn request_id(&self) -> Option<&str> {
        match self {
            BackendError::Transport { request_id, .. }
            | BackendError::Protocol { request_id, .. }
            | BackendError::Timeout { request_id, .. } => Some(request_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub const DEFAULT_TEMPERATURE: f64 = 0.0;
    pub const DEFAULT_MAX_TOKENS: u32 = 1024;

    pub fn new(model_name: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            model_name: model_name.into(),
            messages,
            temperature: Self::DEFAULT_TEMPERATURE,
            max_tokens: Self::DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.messages.first() {
            None => Err(BackendError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::System => Err(BackendError::InvalidRequest(
                "first message must have role system".into(),
            )),
            Some(_) if self.temperature.is_nan() || self.temperature < 0.0 => Err(BackendError::InvalidRequest(
                format!("temperature {} must be a non-negative number", self.temperature),
            )),
            Some(_) if self.max_tokens == 0 => Err(BackendError::InvalidRequest("max_tokens must be positive".into())),
            Some(_) => Ok(()),
        }
    }

    /// Concatenated content of all messages with the given role.
    pub fn content_of(&self, role: Role) -> String {
        self.messages
            .iter()
            .filter(|m| m.role == role)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub input: u64,
    pub output: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub request_id: String,
    pub text: String,
    /// Wall-clock time of the model call only.
    pub latency: Duration,
    pub token_counts: Option<TokenCounts>,
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError>;

    fn name(&self) -> &str;
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}
