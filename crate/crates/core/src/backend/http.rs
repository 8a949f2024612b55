// SPDX-License-Identifier: Apache-2.0

use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest, CompletionResult, TokenCounts};
use crate::types::ChatMessage;

pub const DEFAULT_COMPLETIONS_PATH: &str = "/v1/chat/completions";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpBackendConfig {
    pub url: String,
    pub path: String,
    pub timeout: Duration,
    pub retries: u32,
    pub initial_backoff: Duration,
}

impl HttpBackendConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            path: DEFAULT_COMPLETIONS_PATH.to_string(),
            timeout: Duration::from_secs(120),
            retries: 2,
            initial_backoff: Duration::from_millis(250),
        }
    }

    pub fn endpoint(&self) -> String {
        let base = self.url.trim_end_matches('/');
        if self.path.is_empty() || base.ends_with(self.path.trim_end_matches('/')) {
            base.to_string()
        } else if self.path.starts_with('/') {
            format!("{base}{}", self.path)
        } else {
            format!("{base}/{}", self.path)
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Chat-completion client over HTTP with bounded retries.
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    counter: AtomicU64,
}

enum Attempt {
    Done(String, Option<TokenCounts>),
    Retry(BackendError),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport {
                request_id: "init".into(),
                message: e.to_string(),
            })?;
        Ok(Self {
            config,
            client,
            counter: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.config
    }

    fn next_request_id(&self) -> String {
        format!("req-{}", self.counter.fetch_add(1, Ordering::Relaxed) + 1)
    }

    fn attempt(&self, endpoint: &str, body: &WireRequest<'_>, request_id: &str) -> Attempt {
        let response = match self.client.post(endpoint).json(body).send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => {
                return Attempt::Retry(BackendError::Timeout {
                    request_id: request_id.to_string(),
                    timeout: self.config.timeout,
                })
            }
            Err(e) => {
                return Attempt::Retry(BackendError::Transport {
                    request_id: request_id.to_string(),
                    message: error_chain(&e),
                })
            }
        };
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Attempt::Retry(BackendError::Transport {
                request_id: request_id.to_string(),
                message: format!("server returned {status}"),
            });
        }
        if !status.is_success() {
            return Attempt::Fatal(BackendError::Protocol {
                request_id: request_id.to_string(),
                message: format!("server returned {status}"),
            });
        }
        let bytes = match response.bytes() {
            Ok(b) => b,
            Err(e) if e.is_timeout() => {
                return Attempt::Retry(BackendError::Timeout {
                    request_id: request_id.to_string(),
                    timeout: self.config.timeout,
                })
            }
            Err(e) => {
                return Attempt::Retry(BackendError::Transport {
                    request_id: request_id.to_string(),
                    message: error_chain(&e),
                })
            }
        };
        match parse_response(&bytes) {
            Ok((text, usage)) => Attempt::Done(text, usage),
            Err(message) => Attempt::Fatal(BackendError::Protocol {
                request_id: request_id.to_string(),
                message,
            }),
        }
    }
}

fn error_chain(e: &dyn std::error::Error) -> String {
    let mut message = e.to_string();
    let mut source = e.source();
    while let Some(s) = source {
        message.push_str(": ");
        message.push_str(&s.to_string());
        source = s.source();
    }
    message
}

fn parse_response(bytes: &[u8]) -> Result<(String, Option<TokenCounts>), String> {
    let wire: WireResponse = serde_json::from_slice(bytes).map_err(|e| format!("malformed response body: {e}"))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| "response has no choices".to_string())?;
    let text = choice
        .message
        .content
        .ok_or_else(|| "choices[0].message.content missing".to_string())?;
    let usage = wire.usage.map(|u| TokenCounts {
        input: u.prompt_tokens,
        output: u.completion_tokens,
    });
    Ok((text, usage))
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        request.validate()?;
        let request_id = self.next_request_id();
        let endpoint = self.config.endpoint();
        let body = WireRequest {
            model: &request.model_name,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut backoff = self.config.initial_backoff;
        let started = Instant::now();
        let mut attempt_no = 0;
        loop {
            match self.attempt(&endpoint, &body, &request_id) {
                Attempt::Done(text, token_counts) => {
                    return Ok(CompletionResult {
                        request_id,
                        text,
                        latency: started.elapsed(),
                        token_counts,
                    })
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => {
                    if attempt_no >= self.config.retries {
                        return Err(e);
                    }
                    log::warn!("{e}; retrying in {backoff:?}");
                    thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                    attempt_no += 1;
                }
            }
        }
    }

    fn name(&self) -> &str {
        "http"
    }
}
