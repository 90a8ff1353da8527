use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{CallKey, ChatClient, ChatRequest, ChatResponse, LlmError, Usage, DEFAULT_BASE_URL};

/// Exponential backoff over retryable failures: HTTP 429, HTTP 5xx and timeouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1 << retry.min(16))
    }

    pub fn is_retryable_status(status: u16) -> bool {
        status == 429 || (500..600).contains(&status)
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub base_url: String,
    pub api_key: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl LiveConfig {
    pub fn new(api_key: impl Into<String>) -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.into(),
            api_key: api_key.into(),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
        }
    }
}

/// Client for OpenAI-compatible `/chat/completions` endpoints.
#[derive(Debug, Clone)]
pub struct LiveClient {
    config: LiveConfig,
    http: reqwest::blocking::Client,
}

enum Attempt {
    Done(ChatResponse),
    Retry(LlmError),
    Fail(LlmError),
}

impl LiveClient {
    pub fn new(config: LiveConfig) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LlmError::Transport {
                status: None,
                body: e.to_string(),
            })?;
        Ok(Self { config, http })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, request: &ChatRequest) -> Attempt {
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": request.messages,
        });
        let sent = self
            .http
            .post(self.endpoint())
            .bearer_auth(&self.config.api_key)
            .json(&body)
            .send();
        let response = match sent {
            Ok(r) => r,
            Err(e) => {
                let err = LlmError::Transport {
                    status: None,
                    body: e.to_string(),
                };
                return if e.is_timeout() { Attempt::Retry(err) } else { Attempt::Fail(err) };
            }
        };
        let status = response.status().as_u16();
        let text = match response.text() {
            Ok(t) => t,
            Err(e) => {
                let err = LlmError::Transport {
                    status: Some(status),
                    body: e.to_string(),
                };
                return if e.is_timeout() { Attempt::Retry(err) } else { Attempt::Fail(err) };
            }
        };
        if !(200..300).contains(&status) {
            let err = LlmError::Transport {
                status: Some(status),
                body: text,
            };
            return if RetryPolicy::is_retryable_status(status) {
                Attempt::Retry(err)
            } else {
                Attempt::Fail(err)
            };
        }
        match parse_completion(&text) {
            Ok(r) => Attempt::Done(r),
            Err(e) => Attempt::Fail(e),
        }
    }
}

/// Extracts the first choice's content and the token usage from a response body.
pub(crate) fn parse_completion(body: &str) -> Result<ChatResponse, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))?;
    let usage = v.get("usage").and_then(|u| {
        Some(Usage {
            prompt_units: u.get("prompt_tokens")?.as_u64()?,
            completion_units: u.get("completion_tokens")?.as_u64()?,
        })
    });
    Ok(ChatResponse {
        usage,
        ..ChatResponse::text(content)
    })
}

impl ChatClient for LiveClient {
    fn complete(&self, key: &CallKey, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let start = Instant::now();
        let mut retries = 0;
        loop {
            match self.attempt(request) {
                Attempt::Done(mut r) => {
                    r.retries = retries;
                    r.latency = start.elapsed();
                    return Ok(r);
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) => {
                    if retries >= self.config.retry.max_retries {
                        return Err(e);
                    }
                    let delay = self.config.retry.delay(retries);
                    log::warn!("{key}: {e}; retrying in {delay:?}");
                    thread::sleep(delay);
                    retries += 1;
                }
            }
        }
    }
}
