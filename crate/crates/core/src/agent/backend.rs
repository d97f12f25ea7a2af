//! Language-model backends: a scripted replay backend and a chat-completion
//! HTTP client. Both are request/response only; the loop keeps all state.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
}

pub trait LlmBackend: Send {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError>;
}

/// Creates one backend per intent run.
pub trait BackendFactory: Send + Sync {
    fn create(&self, intent: &str) -> Box<dyn LlmBackend>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    /// Used only when the last observation contains `when`.
    Keyed { when: String, response: ScriptText },
    Plain(ScriptText),
}

/// Raw reply text, or a JSON object that is sent serialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptText {
    Raw(String),
    Json(Value),
}

impl ScriptText {
    fn render(&self) -> String {
        match self {
            ScriptText::Raw(s) => s.clone(),
            ScriptText::Json(v) => v.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentScript {
    /// Case-insensitive substring of the intent text selecting this script.
    pub intent_match: String,
    pub responses: Vec<ScriptEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptFile {
    #[serde(default)]
    pub scripts: Vec<IntentScript>,
    #[serde(default)]
    pub default: Vec<ScriptEntry>,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid script: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ScriptFile {
    /// Accepts either a bare list of responses or `{scripts, default}`.
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let value: Value = serde_json::from_str(text)?;
        if value.is_array() {
            return Ok(ScriptFile {
                scripts: Vec::new(),
                default: serde_json::from_value(value)?,
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn responses_for(&self, intent: &str) -> Vec<ScriptEntry> {
        let lower = intent.to_lowercase();
        self.scripts
            .iter()
            .find(|s| lower.contains(&s.intent_match.to_lowercase()))
            .map(|s| s.responses.clone())
            .unwrap_or_else(|| self.default.clone())
    }
}

pub const SCRIPT_EXHAUSTED: &str = "Script exhausted before the intent was completed.";

/// Replays a fixed response list.
pub struct ScriptedBackend {
    responses: Vec<ScriptEntry>,
    cursor: usize,
}

impl ScriptedBackend {
    pub fn new(responses: Vec<ScriptEntry>) -> Self {
        Self {
            responses,
            cursor: 0,
        }
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError> {
        let last = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let pick = self.responses[self.cursor.min(self.responses.len())..]
            .iter()
            .position(|e| match e {
                ScriptEntry::Plain(_) => true,
                ScriptEntry::Keyed { when, .. } => last.contains(when.as_str()),
            });
        match pick {
            Some(offset) => {
                let idx = self.cursor + offset;
                self.cursor = idx + 1;
                Ok(match &self.responses[idx] {
                    ScriptEntry::Plain(t) | ScriptEntry::Keyed { response: t, .. } => t.render(),
                })
            }
            None => {
                self.cursor = self.responses.len();
                Ok(json!({ "final_answer": SCRIPT_EXHAUSTED }).to_string())
            }
        }
    }
}

pub struct ScriptedFactory {
    pub script: ScriptFile,
}

impl BackendFactory for ScriptedFactory {
    fn create(&self, intent: &str) -> Box<dyn LlmBackend> {
        Box::new(ScriptedBackend::new(self.script.responses_for(intent)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Name of an environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

fn default_timeout_ms() -> u64 {
    60_000
}

/// Chat-completion client: `{model, temperature, messages}` in, first choice out.
pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn request_body(&self, messages: &[Message]) -> Value {
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": messages,
        })
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError> {
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = self
            .config
            .api_key_env
            .as_ref()
            .and_then(|name| std::env::var(name).ok())
        {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(self.request_body(messages))
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = response.status();
        let body: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Unavailable(format!("HTTP {status}: {body}")));
        }
        body.pointer("/choices/0/message/content")
            .or_else(|| body.pointer("/choices/0/text"))
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| BackendError::Protocol("response has no choices[0] text".into()))
    }
}

pub struct HttpFactory {
    pub config: HttpBackendConfig,
}

impl BackendFactory for HttpFactory {
    fn create(&self, _intent: &str) -> Box<dyn LlmBackend> {
        Box::new(HttpBackend::new(self.config.clone()))
    }
}
