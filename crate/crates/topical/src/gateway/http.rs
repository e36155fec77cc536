//! OpenAI-compatible chat-completion transport over HTTPS.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, CompletionRequest, CompletionResponse, GatewayError, ModelConfig};
use crate::jsonx::excerpt;

const REQUEST_TIMEOUT: Duration = Duration::from_secs(300);
const EXCERPT_CHARS: usize = 200;

pub struct HttpBackend {
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new() -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .expect("reqwest client builds");
        HttpBackend { client }
    }
}

impl Default for HttpBackend {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Deserialize)]
struct ChatCompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

impl Backend for HttpBackend {
    fn attempt(
        &self,
        config: &ModelConfig,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, GatewayError> {
        let mut messages = Vec::with_capacity(2);
        if !request.system.is_empty() {
            messages.push(json!({"role": "system", "content": request.system}));
        }
        messages.push(json!({"role": "user", "content": request.user}));
        let body = json!({
            "model": config.model_name,
            "messages": messages,
            "temperature": request.temperature.unwrap_or(config.temperature),
            "max_tokens": request.max_output_tokens.unwrap_or(config.max_output_tokens),
        });

        let mut builder = self.client.post(&config.endpoint_url).json(&body);
        if !config.api_key_env.is_empty() {
            let key = std::env::var(&config.api_key_env)
                .map_err(|_| GatewayError::MissingApiKey(config.api_key_env.clone()))?;
            builder = builder.header(reqwest::header::AUTHORIZATION, format!("Bearer {key}"));
        }

        let response = builder
            .send()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .text()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Status {
                status,
                excerpt: excerpt(&text, EXCERPT_CHARS),
            });
        }

        let parsed: ChatCompletionBody = serde_json::from_str(&text).map_err(|e| {
            GatewayError::BadResponse(format!("{e}; body: {}", excerpt(&text, EXCERPT_CHARS)))
        })?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::BadResponse("response has no choices".into()))?;
        Ok(CompletionResponse {
            text: choice.message.content.unwrap_or_default(),
            finish_reason: choice.finish_reason.unwrap_or_else(|| "stop".into()),
            prompt_tokens: parsed.usage.as_ref().and_then(|u| u.prompt_tokens),
            completion_tokens: parsed.usage.as_ref().and_then(|u| u.completion_tokens),
        })
    }

    fn name(&self) -> &'static str {
        "http"
    }
}
