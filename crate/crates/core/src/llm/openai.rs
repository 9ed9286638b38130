use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{GenerationRequest, GenerationResponse, LlmBackend, LlmError};
use crate::http::{self, HttpError, RetryPolicy};

pub const API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenAiConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
}

impl Default for OpenAiConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: 0.7,
            max_tokens: None,
            timeout_secs: 120,
            max_retries: 3,
            initial_backoff_ms: 500,
        }
    }
}

impl OpenAiConfig {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            initial_backoff: Duration::from_millis(self.initial_backoff_ms),
            ..RetryPolicy::default()
        }
    }
}

/// Client for `POST {base_url}/chat/completions`.
pub struct OpenAiClient {
    config: OpenAiConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl OpenAiClient {
    /// Reads the key from `LLM_API_KEY`; fails if it is unset.
    pub fn from_env(config: OpenAiConfig) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| LlmError::MissingApiKey(API_KEY_ENV))?;
        Ok(Self::new(config, Some(key)))
    }

    /// Local servers often need no key.
    pub fn new(config: OpenAiConfig, api_key: Option<String>) -> Self {
        let agent = http::agent(Duration::from_secs(config.timeout_secs));
        Self { config, api_key, agent }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn body(&self, req: &GenerationRequest) -> Value {
        let model = if req.model.is_empty() { &self.config.model } else { &req.model };
        let mut body = json!({
            "model": model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature.unwrap_or(self.config.temperature),
            "n": 1,
        });
        if let Some(max) = req.max_tokens.or(self.config.max_tokens) {
            body["max_tokens"] = json!(max);
        }
        body
    }

    fn post(&self, body: &Value) -> Result<String, HttpError> {
        let mut call = self.agent.post(self.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let resp = call.send_json(body)?;
        http::read_body(resp)
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl LlmBackend for OpenAiClient {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, LlmError> {
        let body = self.body(req);
        let (text, retries) = self
            .config
            .retry_policy()
            .run(|| self.post(&body), HttpError::is_retryable);
        let parsed: ChatResponse = serde_json::from_str(&text?).map_err(|e| LlmError::Malformed(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| LlmError::Malformed("no choices".into()))?;
        let text = choice.message.content.unwrap_or_default();
        if text.trim().is_empty() {
            return Err(LlmError::EmptyResponse);
        }
        Ok(GenerationResponse {
            text,
            finish_reason: choice.finish_reason,
            retries,
        })
    }

    fn default_model(&self) -> &str {
        &self.config.model
    }
}
