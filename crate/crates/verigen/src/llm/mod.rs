//! Provider-agnostic candidate sampling.
//!
//! A [`Provider`] turns a prompt into `n` raw responses at a given
//! temperature. The mock provider replays a directory of scripted reply
//! files for byte-reproducible runs; the HTTP provider speaks the common
//! `/v1/chat/completions` wire shape. Nothing in this module inspects
//! compilation or verification state.

mod http;
mod mock;

pub use http::{HttpProvider, API_BASE_ENV, API_KEY_ENV};
pub use mock::MockProvider;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::Prompt;

/// How many candidates to request and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    /// Candidates per invocation.
    pub n: usize,
    /// Sampling temperature in [0, 1].
    pub temperature: f64,
    pub model: String,
    pub max_tokens: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            n: 10,
            temperature: 1.0,
            model: "gpt-3.5-turbo".to_string(),
            max_tokens: 1024,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.n < 1 {
            return Err(LlmError::InvalidParams("n must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(LlmError::InvalidParams(
                "temperature must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Token accounting reported by a provider, when available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One raw model reply. An empty `text` is a degenerate sample and is
/// recorded rather than dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    pub provider: String,
    pub latency_ms: u64,
    pub usage: Option<TokenUsage>,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("mock script exhausted: needed {needed} replies, {available} left")]
    ScriptExhausted { needed: usize, available: usize },
    #[error("invalid sampling parameters: {0}")]
    InvalidParams(String),
    #[error("empty response")]
    EmptyResponse,
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl LlmError {
    /// Transient failures worth retrying; everything else is fatal.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            LlmError::ProviderUnreachable(_) | LlmError::RateLimited(_)
        )
    }
}

/// A candidate source: mock script or live endpoint.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    /// Return exactly `params.n` responses, in provider order.
    fn sample(&self, prompt: &Prompt, params: &SamplingParams) -> Result<Vec<RawResponse>, LlmError>;
}

/// Bounded retries with exponential backoff, applied only to retryable
/// errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, LlmError>) -> Result<T, LlmError> {
        let mut backoff = self.initial_backoff;
        let mut attempt = 1;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.attempts => {
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Sample `params.n` candidates from `provider`, retrying transient
/// failures per `retry`.
pub fn sample_candidates(
    prompt: &Prompt,
    params: &SamplingParams,
    provider: &dyn Provider,
    retry: &RetryPolicy,
) -> Result<Vec<RawResponse>, LlmError> {
    params.validate()?;
    let responses = retry.run(|| provider.sample(prompt, params))?;
    if responses.len() != params.n {
        return Err(LlmError::Protocol(format!(
            "provider `{}` returned {} responses, expected {}",
            provider.name(),
            responses.len(),
            params.n
        )));
    }
    Ok(responses)
}

/// Extract C source from a reply: the body of the first fenced code block
/// if one exists, the whole text otherwise. Fence markers and language tags
/// are stripped.
pub fn extract_code(response: &RawResponse) -> Result<String, LlmError> {
    if response.text.trim().is_empty() {
        return Err(LlmError::EmptyResponse);
    }
    let mut in_block = false;
    let mut block = String::new();
    for line in response.text.lines() {
        let trimmed = line.trim_start();
        if !in_block {
            if trimmed.starts_with("```") {
                in_block = true;
            }
            continue;
        }
        if trimmed.starts_with("```") {
            return Ok(block.trim_end().to_string());
        }
        block.push_str(line);
        block.push('\n');
    }
    if in_block && !block.trim().is_empty() {
        // unterminated fence: take what followed the opener
        return Ok(block.trim_end().to_string());
    }
    Ok(response.text.trim().to_string())
}
