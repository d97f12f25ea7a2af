//! Blocking client for the stack's HTTP API.

use std::io::{BufRead, BufReader};
use std::time::Duration;

use serde_json::Value;

pub const DEFAULT_API: &str = "http://127.0.0.1:7878";

#[derive(Debug)]
pub enum ApiError {
    /// The server answered with a non-success status.
    Status { status: u16, message: String },
    Transport(String),
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApiError::Status { status, message } => write!(f, "{message} (HTTP {status})"),
            ApiError::Transport(e) => write!(f, "cannot reach the API: {e}"),
        }
    }
}

impl std::error::Error for ApiError {}

/// One server-sent event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SseEvent {
    pub id: Option<String>,
    pub event: String,
    pub data: String,
}

pub struct ApiClient {
    base: String,
    agent: ureq::Agent,
    streaming: ureq::Agent,
}

fn agent(timeout: Option<Duration>) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(timeout)
        .http_status_as_error(false)
        .build()
        .into()
}

impl ApiClient {
    pub fn new(base: &str) -> Self {
        Self {
            base: base.trim_end_matches('/').to_owned(),
            agent: agent(Some(Duration::from_secs(120))),
            streaming: agent(None),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn finish(result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<Value, ApiError> {
        let mut response = result.map_err(|e| ApiError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ApiError::Transport(e.to_string()))?;
        let body: Value = serde_json::from_str(&text).unwrap_or(Value::String(text));
        if (200..300).contains(&status) {
            return Ok(body);
        }
        let message = body
            .get("error")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .unwrap_or_else(|| match &body {
                Value::String(s) if !s.is_empty() => s.clone(),
                other => other.to_string(),
            });
        Err(ApiError::Status { status, message })
    }

    pub fn get(&self, path: &str) -> Result<Value, ApiError> {
        Self::finish(self.agent.get(&self.url(path)).call())
    }

    pub fn post(&self, path: &str, body: &Value) -> Result<Value, ApiError> {
        Self::finish(self.agent.post(&self.url(path)).send_json(body))
    }

    pub fn delete(&self, path: &str) -> Result<Value, ApiError> {
        Self::finish(self.agent.delete(&self.url(path)).call())
    }

    /// Reads an event stream, calling `on_event` until it returns false or the stream ends.
    pub fn stream(
        &self,
        path: &str,
        last_event_id: Option<&str>,
        mut on_event: impl FnMut(SseEvent) -> bool,
    ) -> Result<(), ApiError> {
        let mut request = self.streaming.get(&self.url(path)).header("Accept", "text/event-stream");
        if let Some(id) = last_event_id {
            request = request.header("Last-Event-ID", id);
        }
        let response = request.call().map_err(|e| ApiError::Transport(e.to_string()))?;
        if !response.status().is_success() {
            return Self::finish(Ok(response)).map(|_| ());
        }
        let reader = BufReader::new(response.into_body().into_reader());
        let mut current = SseEvent::default();
        let mut data: Vec<String> = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|e| ApiError::Transport(e.to_string()))?;
            if line.is_empty() {
                if !data.is_empty() || !current.event.is_empty() {
                    current.data = data.join("\n");
                    if current.event.is_empty() {
                        current.event = "message".into();
                    }
                    if !on_event(std::mem::take(&mut current)) {
                        return Ok(());
                    }
                }
                data.clear();
                continue;
            }
            if line.starts_with(':') {
                continue;
            }
            let (field, value) = line.split_once(':').unwrap_or((line.as_str(), ""));
            let value = value.strip_prefix(' ').unwrap_or(value);
            match field {
                "id" => current.id = Some(value.to_owned()),
                "event" => current.event = value.to_owned(),
                "data" => data.push(value.to_owned()),
                _ => {}
            }
        }
        Ok(())
    }
}
