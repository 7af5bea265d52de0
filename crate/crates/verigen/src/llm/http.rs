//! Chat-completion client for `/v1/chat/completions`-compatible endpoints.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{LlmError, Provider, RawResponse, SamplingParams, TokenUsage};
use crate::prompt::{ChatMessage, Prompt};

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "LLM_API_KEY";
/// Environment variable overriding the endpoint base URL.
pub const API_BASE_ENV: &str = "LLM_API_BASE";

const DEFAULT_BASE: &str = "https://api.openai.com";

pub struct HttpProvider {
    base_url: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage>,
    n: usize,
    temperature: f64,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    index: Option<usize>,
    message: MessageBody,
}

#[derive(Deserialize)]
struct MessageBody {
    content: Option<String>,
}

#[derive(Deserialize)]
struct UsageBody {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

impl HttpProvider {
    /// Build a provider from explicit settings.
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| LlmError::Protocol(e.to_string()))?;
        Ok(HttpProvider {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            client,
        })
    }

    /// Build a provider from `LLM_API_KEY` and `LLM_API_BASE`.
    pub fn from_env() -> Result<Self, LlmError> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| LlmError::AuthFailure(format!("{API_KEY_ENV} is not set")))?;
        let base_url = std::env::var(API_BASE_ENV).unwrap_or_else(|_| DEFAULT_BASE.to_string());
        Self::new(base_url, api_key)
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url)
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn sample(&self, prompt: &Prompt, params: &SamplingParams) -> Result<Vec<RawResponse>, LlmError> {
        let body = ChatRequest {
            model: &params.model,
            messages: prompt.to_messages(),
            n: params.n,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
        };
        let start = Instant::now();
        let response = self
            .client
            .post(self.endpoint())
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| LlmError::ProviderUnreachable(e.to_string()))?;

        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(LlmError::AuthFailure(format!("endpoint returned {status}")));
        }
        if status.as_u16() == 429 {
            return Err(LlmError::RateLimited(format!("endpoint returned {status}")));
        }
        if status.is_server_error() {
            return Err(LlmError::ProviderUnreachable(format!(
                "endpoint returned {status}"
            )));
        }
        if !status.is_success() {
            return Err(LlmError::Protocol(format!("endpoint returned {status}")));
        }

        let latency_ms = start.elapsed().as_millis() as u64;
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| LlmError::Protocol(format!("bad response body: {e}")))?;
        let usage = parsed.usage.map(|u| TokenUsage {
            prompt_tokens: u.prompt_tokens.unwrap_or(0),
            completion_tokens: u.completion_tokens.unwrap_or(0),
        });

        let mut choices = parsed.choices;
        choices.sort_by_key(|c| c.index.unwrap_or(0));
        Ok(choices
            .into_iter()
            .map(|c| RawResponse {
                text: c.message.content.unwrap_or_default(),
                provider: "http".to_string(),
                latency_ms,
                usage,
            })
            .collect())
    }
}
