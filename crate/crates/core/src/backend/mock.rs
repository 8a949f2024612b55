// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest, CompletionResult};
use crate::types::Role;

/// Selects which requests a scripted response applies to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    /// Some message (restricted to `role` when given) contains `needle`.
    Contains { needle: String, role: Option<Role> },
    /// The n-th call to the backend, counting from 1.
    Call(u64),
}

impl Matcher {
    pub fn contains(needle: impl Into<String>) -> Self {
        Matcher::Contains {
            needle: needle.into(),
            role: None,
        }
    }

    pub fn user_contains(needle: impl Into<String>) -> Self {
        Matcher::Contains {
            needle: needle.into(),
            role: Some(Role::User),
        }
    }

    fn matches(&self, request: &CompletionRequest, call: u64) -> bool {
        match self {
            Matcher::Call(n) => *n == call,
            Matcher::Contains { needle, role } => request
                .messages
                .iter()
                .filter(|m| role.is_none_or(|r| m.role == r))
                .any(|m| m.content.contains(needle.as_str())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockReply {
    Text(String),
    /// Simulated transport failure with the given message.
    Fail(String),
}

#[derive(Default)]
struct MockState {
    rules: Vec<(Matcher, MockReply)>,
    calls: u64,
    requests: Vec<CompletionRequest>,
}

/// Deterministic scripted backend.
///
/// Rules are evaluated in registration order and the first match wins; requests
/// that match nothing receive the fallback text.
pub struct MockBackend {
    state: Mutex<MockState>,
    fallback: String,
    latency: Duration,
}

impl MockBackend {
    pub fn new(fallback: impl Into<String>) -> Self {
        Self {
            state: Mutex::new(MockState::default()),
            fallback: fallback.into(),
            latency: Duration::ZERO,
        }
    }

    /// Synthetic latency reported on every completion.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn register(&self, matcher: Matcher, response: impl Into<String>) -> Result<(), BackendError> {
        self.register_reply(matcher, MockReply::Text(response.into()))
    }

    pub fn register_failure(&self, matcher: Matcher, message: impl Into<String>) -> Result<(), BackendError> {
        self.register_reply(matcher, MockReply::Fail(message.into()))
    }

    pub fn register_reply(&self, matcher: Matcher, reply: MockReply) -> Result<(), BackendError> {
        let mut state = self.state.lock().expect("mock state poisoned");
        if state.rules.iter().any(|(m, _)| *m == matcher) {
            return Err(BackendError::DuplicateRule(format!("{matcher:?}")));
        }
        state.rules.push((matcher, reply));
        Ok(())
    }

    pub fn call_count(&self) -> u64 {
        self.state.lock().expect("mock state poisoned").calls
    }

    /// Every request seen so far, in call order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.state.lock().expect("mock state poisoned").requests.clone()
    }

    pub fn from_script(script: &MockScript) -> Result<Self, BackendError> {
        let mock = MockBackend::new(script.fallback.clone())
            .with_latency(Duration::from_secs_f64(script.latency_secs.max(0.0)));
        for (i, rule) in script.rules.iter().enumerate() {
            let matcher = match (&rule.contains, rule.call) {
                (Some(needle), None) => Matcher::Contains {
                    needle: needle.clone(),
                    role: rule.role,
                },
                (None, Some(n)) if n >= 1 => Matcher::Call(n),
                _ => {
                    return Err(BackendError::Script(format!(
                        "rule {} must set exactly one of `contains` or `call` (call >= 1)",
                        i + 1
                    )))
                }
            };
            let reply = match (&rule.response, &rule.fail) {
                (Some(text), None) => MockReply::Text(text.clone()),
                (None, Some(msg)) => MockReply::Fail(msg.clone()),
                _ => {
                    return Err(BackendError::Script(format!(
                        "rule {} must set exactly one of `response` or `fail`",
                        i + 1
                    )))
                }
            };
            mock.register_reply(matcher, reply)?;
        }
        Ok(mock)
    }

    pub fn from_script_file(path: &Path) -> Result<Self, BackendError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))?;
        let script: MockScript =
            toml::from_str(&text).map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))?;
        Self::from_script(&script)
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        request.validate()?;
        let mut state = self.state.lock().expect("mock state poisoned");
        state.calls += 1;
        let call = state.calls;
        state.requests.push(request.clone());
        let request_id = format!("mock-{call}");
        let reply = state
            .rules
            .iter()
            .find(|(m, _)| m.matches(request, call))
            .map(|(_, r)| r.clone())
            .unwrap_or_else(|| MockReply::Text(self.fallback.clone()));
        match reply {
            MockReply::Text(text) => Ok(CompletionResult {
                request_id,
                text,
                latency: self.latency,
                token_counts: None,
            }),
            MockReply::Fail(message) => Err(BackendError::Transport { request_id, message }),
        }
    }

    fn name(&self) -> &str {
        "mock"
    }
}

/// On-disk mock script (TOML).
///
/// ```toml
/// fallback = "enable"
/// latency_secs = 0.5
///
/// [[rule]]
/// contains = "classify"
/// response = "routing"
///
/// [[rule]]
/// call = 3
/// fail = "connection reset"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub fallback: String,
    #[serde(default)]
    pub latency_secs: f64,
    #[serde(default, rename = "rule")]
    pub rules: Vec<MockScriptRule>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScriptRule {
    #[serde(default)]
    pub contains: Option<String>,
    #[serde(default)]
    pub role: Option<Role>,
    #[serde(default)]
    pub call: Option<u64>,
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub fail: Option<String>,
}
