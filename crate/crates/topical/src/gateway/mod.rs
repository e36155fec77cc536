//! Uniform client for chat-completion endpoints.
//!
//! One wire protocol (OpenAI-style chat completions) reaches every endpoint
//! we care about; backends differ only in transport. [`HttpBackend`] speaks
//! HTTPS, [`MockBackend`] replays scripted responses for offline runs. The
//! [`Gateway`] wraps either with retry/backoff and bounded-parallel fan-out.

mod http;
mod mock;

pub use http::HttpBackend;
pub use mock::{request_fingerprint, CannedResponse, MockBackend, MockScript};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Error, Result};

/// Per-model endpoint and request-shaping configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key. Empty means no
    /// Authorization header (e.g. local endpoints).
    pub api_key_env: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Upper bound on concurrent in-flight requests.
    pub max_in_flight: usize,
    /// Retries after the first attempt, on transient failures only.
    pub retry_limit: u32,
    pub backoff_base_ms: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            endpoint_url: String::new(),
            model_name: String::new(),
            api_key_env: String::new(),
            temperature: 0.0,
            max_output_tokens: 4_096,
            max_in_flight: 4,
            retry_limit: 3,
            backoff_base_ms: 500,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Config(format!(
                "temperature must be in [0, 2], got {}",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(Error::Config("max_output_tokens must be at least 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    /// Extra validation for the live HTTP backend.
    pub fn validate_live(&self) -> Result<()> {
        self.validate()?;
        if !(self.endpoint_url.starts_with("http://") || self.endpoint_url.starts_with("https://"))
        {
            return Err(Error::Config(format!(
                "endpoint_url must be an http(s) URL, got {:?}",
                self.endpoint_url
            )));
        }
        if self.model_name.is_empty() {
            return Err(Error::Config("model_name must not be empty".into()));
        }
        Ok(())
    }

    pub fn backoff_base(&self) -> Duration {
        Duration::from_millis(self.backoff_base_ms)
    }
}

/// One chat completion request. `None` limits fall back to the model config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system: String,
    pub user: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
}

impl CompletionRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>) -> Self {
        CompletionRequest {
            system: system.into(),
            user: user.into(),
            temperature: None,
            max_output_tokens: None,
        }
    }
}

/// The endpoint's reply, with the message text preserved byte-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: String,
    #[serde(default)]
    pub prompt_tokens: Option<u64>,
    #[serde(default)]
    pub completion_tokens: Option<u64>,
}

impl CompletionResponse {
    /// The model hit its output limit; downstream parsing decides severity.
    pub fn truncated(&self) -> bool {
        self.finish_reason == "length"
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("HTTP {status}: {excerpt}")]
    Status { status: u16, excerpt: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("API key environment variable {0} is not set")]
    MissingApiKey(String),

    #[error("no scripted response for fingerprint {0}")]
    Unscripted(String),

    #[error("malformed completion response: {0}")]
    BadResponse(String),

    #[error("gave up after {attempts} attempt(s): {last}")]
    RetriesExhausted {
        attempts: u32,
        #[source]
        last: Box<GatewayError>,
    },
}

impl GatewayError {
    /// Worth retrying: rate limits, server errors, timeouts.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Status { status, .. } => {
                *status == 429 || (500..600).contains(status)
            }
            GatewayError::Transport(_) => true,
            _ => false,
        }
    }
}

/// A single completion attempt against some transport.
pub trait Backend: Send + Sync {
    fn attempt(
        &self,
        config: &ModelConfig,
        request: &CompletionRequest,
    ) -> std::result::Result<CompletionResponse, GatewayError>;

    fn name(&self) -> &'static str;
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn attempt(
        &self,
        config: &ModelConfig,
        request: &CompletionRequest,
    ) -> std::result::Result<CompletionResponse, GatewayError> {
        (**self).attempt(config, request)
    }

    fn name(&self) -> &'static str {
        (**self).name()
    }
}

/// Retry/backoff and fan-out wrapper around a [`Backend`].
pub struct Gateway {
    config: ModelConfig,
    backend: Box<dyn Backend>,
}

impl Gateway {
    pub fn new(config: ModelConfig, backend: Box<dyn Backend>) -> Result<Self> {
        config.validate()?;
        Ok(Gateway { config, backend })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Complete one request, retrying transient failures up to `retry_limit`
    /// times with exponential backoff.
    pub fn complete(
        &self,
        request: &CompletionRequest,
    ) -> std::result::Result<CompletionResponse, GatewayError> {
        let mut attempt = 0u32;
        loop {
            match self.backend.attempt(&self.config, request) {
                Ok(response) => {
                    if response.truncated() {
                        log::warn!(
                            "{} completion truncated (finish_reason = length)",
                            self.backend.name()
                        );
                    }
                    return Ok(response);
                }
                Err(e) if e.is_transient() && attempt < self.config.retry_limit => {
                    let delay = self.config.backoff_base() * 2u32.saturating_pow(attempt);
                    log::warn!(
                        "{} attempt {} failed ({e}); retrying in {delay:?}",
                        self.backend.name(),
                        attempt + 1
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) if e.is_transient() => {
                    return Err(GatewayError::RetriesExhausted {
                        attempts: attempt + 1,
                        last: Box::new(e),
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Complete many requests with at most `max_in_flight` outstanding at
    /// once. Results come back keyed by request index, never by completion
    /// order.
    pub fn complete_many(
        &self,
        requests: &[CompletionRequest],
    ) -> Vec<std::result::Result<CompletionResponse, GatewayError>> {
        if requests.is_empty() {
            return Vec::new();
        }
        let workers = self.config.max_in_flight.min(requests.len());
        if workers <= 1 {
            return requests.iter().map(|r| self.complete(r)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<std::result::Result<CompletionResponse, GatewayError>>>> =
            (0..requests.len()).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= requests.len() {
                        break;
                    }
                    let result = self.complete(&requests[i]);
                    *slots[i].lock().unwrap() = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|slot| slot.into_inner().unwrap().expect("worker filled slot"))
            .collect()
    }
}
