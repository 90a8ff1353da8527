//! Chat-completion boundary: scripted, replay, live and recording clients.

mod fixtures;
mod live;
mod recording;
pub mod stub;
mod transcript;

use std::collections::VecDeque;
use std::fmt;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixtures::{FixtureEntry, FixtureStore, ReplayClient};
pub use live::{LiveClient, LiveConfig, RetryPolicy};
pub use recording::RecordingClient;
pub use stub::{StubReply, StubRequest, StubServer};
pub use transcript::{count_transcript_units, whitespace_units, CallRecord, TranscriptUnits};

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const API_KEY_VAR: &str = "ORMIND_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<Message>,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("at least one message is required".into()));
        }
        if !self.temperature.is_finite() || !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} is outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Concatenated message contents.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_units: u64,
    pub completion_units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub usage: Option<Usage>,
    /// Not serialized: traces must not depend on timing.
    #[serde(skip)]
    pub latency: Duration,
    /// Retries spent by the transport before this response.
    #[serde(default)]
    pub retries: u32,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            usage: None,
            latency: Duration::ZERO,
            retries: 0,
        }
    }
}

/// Identifies one stage call within a run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallKey {
    pub stage: String,
    pub problem: String,
    pub attempt: u32,
}

impl CallKey {
    pub fn new(stage: impl Into<String>, problem: impl Into<String>, attempt: u32) -> Self {
        Self {
            stage: stage.into(),
            problem: problem.into(),
            attempt,
        }
    }

    /// Key inside a per-problem fixture file: `<stage>/<attempt>`.
    pub fn fixture_key(&self) -> String {
        format!("{}/{}", self.stage, self.attempt)
    }
}

impl fmt::Display for CallKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.problem, self.fixture_key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error (status {status:?}): {body}")]
    Transport { status: Option<u16>, body: String },
    #[error("no fixture for {0}")]
    FixtureMiss(String),
    #[error("scripted responses exhausted")]
    ScriptExhausted,
    #[error("cannot write fixtures: {0}")]
    StorageWrite(String),
    #[error("cannot read fixtures: {0}")]
    StorageRead(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

/// A chat-completion backend. Implementations are safe for concurrent calls.
pub trait ChatClient: Send + Sync {
    fn complete(&self, key: &CallKey, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

/// Returns queued responses in order, regardless of the key.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    queue: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<CallKey>>,
}

impl ScriptedClient {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    /// Keys of every call made so far.
    pub fn calls(&self) -> Vec<CallKey> {
        self.seen.lock().expect("scripted client lock").clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("scripted client lock").len()
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, key: &CallKey, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        self.seen.lock().expect("scripted client lock").push(key.clone());
        let next = self.queue.lock().expect("scripted client lock").pop_front();
        next.map(ChatResponse::text).ok_or(LlmError::ScriptExhausted)
    }
}
