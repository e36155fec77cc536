//! Deterministic scripted backend for offline pipeline runs and tests.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, CompletionRequest, CompletionResponse, GatewayError, ModelConfig};
use crate::{sha256_hex, Error, Result};

/// Stable fingerprint of a request: SHA-256 over length-prefixed system and
/// user text, first 16 hex chars. Script files key canned responses by this.
pub fn request_fingerprint(system: &str, user: &str) -> String {
    let mut buf = Vec::with_capacity(16 + system.len() + user.len());
    buf.extend_from_slice(&(system.len() as u64).to_le_bytes());
    buf.extend_from_slice(system.as_bytes());
    buf.extend_from_slice(&(user.len() as u64).to_le_bytes());
    buf.extend_from_slice(user.as_bytes());
    sha256_hex(&buf)[..16].to_string()
}

/// One canned reply. When `status` is set, the entry simulates an HTTP error
/// instead of returning text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CannedResponse {
    #[serde(default)]
    pub text: String,
    #[serde(default = "default_finish_reason")]
    pub finish_reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
}

fn default_finish_reason() -> String {
    "stop".into()
}

impl CannedResponse {
    pub fn text(text: impl Into<String>) -> Self {
        CannedResponse {
            text: text.into(),
            finish_reason: default_finish_reason(),
            status: None,
        }
    }

    pub fn error(status: u16) -> Self {
        CannedResponse {
            text: String::new(),
            finish_reason: String::new(),
            status: Some(status),
        }
    }
}

/// Fingerprint → response map with an optional fallback.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<CannedResponse>,
    #[serde(default)]
    pub responses: HashMap<String, CannedResponse>,
}

impl MockScript {
    pub fn with_default(text: impl Into<String>) -> Self {
        MockScript {
            default: Some(CannedResponse::text(text)),
            responses: HashMap::new(),
        }
    }

    pub fn respond_to(
        mut self,
        system: &str,
        user: &str,
        response: CannedResponse,
    ) -> Self {
        self.responses
            .insert(request_fingerprint(system, user), response);
        self
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("invalid mock script {}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("script serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// Scripted backend with concurrency instrumentation.
pub struct MockBackend {
    script: MockScript,
    latency: Option<Duration>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight_seen: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            latency: None,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight_seen: AtomicUsize::new(0),
        }
    }

    pub fn from_script_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(MockScript::load(path)?))
    }

    /// Artificial per-request latency, for observing request overlap.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of simultaneously outstanding requests observed.
    pub fn max_in_flight_seen(&self) -> usize {
        self.max_in_flight_seen.load(Ordering::SeqCst)
    }
}

impl Backend for MockBackend {
    fn attempt(
        &self,
        _config: &ModelConfig,
        request: &CompletionRequest,
    ) -> std::result::Result<CompletionResponse, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let current = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight_seen.fetch_max(current, Ordering::SeqCst);
        if let Some(latency) = self.latency {
            std::thread::sleep(latency);
        }
        let fingerprint = request_fingerprint(&request.system, &request.user);
        let canned = self
            .script
            .responses
            .get(&fingerprint)
            .or(self.script.default.as_ref());
        let result = match canned {
            Some(c) => match c.status {
                Some(status) => Err(GatewayError::Status {
                    status,
                    excerpt: c.text.clone(),
                }),
                None => Ok(CompletionResponse {
                    text: c.text.clone(),
                    finish_reason: c.finish_reason.clone(),
                    prompt_tokens: None,
                    completion_tokens: None,
                }),
            },
            None => Err(GatewayError::Unscripted(fingerprint)),
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }

    fn name(&self) -> &'static str {
        "mock"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Gateway;

    fn config(max_in_flight: usize) -> ModelConfig {
        ModelConfig {
            max_in_flight,
            retry_limit: 0,
            backoff_base_ms: 0,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn scripted_response_comes_back_byte_exact() {
        let canned = r#"[{"Topic 1": {"Summary": "s", "Keywords": ["k"]}}]"#;
        let script = MockScript::default().respond_to("sys", "user", CannedResponse::text(canned));
        let backend = MockBackend::new(script);
        let response = backend
            .attempt(&config(1), &CompletionRequest::new("sys", "user"))
            .unwrap();
        assert_eq!(response.text, canned);
        assert_eq!(response.finish_reason, "stop");
    }

    #[test]
    fn same_request_twice_gets_identical_responses() {
        let backend = MockBackend::new(MockScript::with_default("fixed"));
        let request = CompletionRequest::new("a", "b");
        let first = backend.attempt(&config(1), &request).unwrap();
        let second = backend.attempt(&config(1), &request).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn unscripted_request_without_default_names_the_fingerprint() {
        let backend = MockBackend::new(MockScript::default());
        let request = CompletionRequest::new("sys", "novel");
        let err = backend.attempt(&config(1), &request).unwrap_err();
        match err {
            GatewayError::Unscripted(fp) => {
                assert_eq!(fp, request_fingerprint("sys", "novel"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn in_flight_never_exceeds_the_configured_bound() {
        let backend = std::sync::Arc::new(
            MockBackend::new(MockScript::with_default("ok"))
                .with_latency(Duration::from_millis(15)),
        );
        let gateway = Gateway::new(config(3), Box::new(backend.clone())).unwrap();
        let requests: Vec<CompletionRequest> = (0..12)
            .map(|i| CompletionRequest::new("s", format!("u{i}")))
            .collect();
        let results = gateway.complete_many(&requests);
        assert!(results.iter().all(|r| r.is_ok()));
        assert!(backend.max_in_flight_seen() <= 3);
        assert!(backend.max_in_flight_seen() >= 2, "expected some overlap");
        assert_eq!(backend.calls(), 12);
    }

    #[test]
    fn script_round_trips_through_json_file() {
        let script = MockScript::with_default("d").respond_to("s", "u", CannedResponse::error(429));
        let f = tempfile::NamedTempFile::new().unwrap();
        script.save(f.path()).unwrap();
        assert_eq!(MockScript::load(f.path()).unwrap(), script);
    }
}
