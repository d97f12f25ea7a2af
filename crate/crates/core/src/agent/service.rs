//! Intent sessions: each submitted intent runs on its own worker thread.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::backend::BackendFactory;
use super::runner::{run_intent, AgentConfig, ApprovalWaiter, IntentOutcome, RunControl, RunStatus};
use super::transcript::Transcript;
use crate::gateway::ToolGateway;

type TranscriptHook = Arc<dyn Fn(&str, usize) + Send + Sync>;

pub struct IntentSession {
    pub intent_id: String,
    pub text: String,
    pub submitted_at_ms: u64,
    pub control: RunControl,
    pub transcript: Transcript,
    outcome: Mutex<Option<IntentOutcome>>,
    finished: Condvar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentStatus {
    pub intent_id: String,
    pub text: String,
    pub submitted_at_ms: u64,
    pub status: RunStatus,
    pub iteration: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_approval: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<IntentOutcome>,
}

impl IntentSession {
    pub fn status(&self) -> IntentStatus {
        let outcome = self.outcome.lock().unwrap_or_else(|e| e.into_inner()).clone();
        let state = self.control.state();
        IntentStatus {
            intent_id: self.intent_id.clone(),
            text: self.text.clone(),
            submitted_at_ms: self.submitted_at_ms,
            status: outcome.as_ref().map_or(state.status, |o| o.status),
            iteration: state.iteration,
            pending_approval: state.pending_token,
            outcome,
        }
    }

    pub fn outcome(&self) -> Option<IntentOutcome> {
        self.outcome.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Waits for the run to finish; `None` on timeout.
    pub fn wait(&self, timeout: Duration) -> Option<IntentOutcome> {
        let guard = self.outcome.lock().unwrap_or_else(|e| e.into_inner());
        let (guard, _) = self
            .finished
            .wait_timeout_while(guard, timeout, |o| o.is_none())
            .unwrap_or_else(|e| e.into_inner());
        guard.clone()
    }
}

pub struct IntentService {
    gateway: Arc<dyn ToolGateway>,
    backends: Arc<dyn BackendFactory>,
    waiter: Arc<dyn ApprovalWaiter>,
    config: AgentConfig,
    transcript_dir: Option<PathBuf>,
    on_transcript: Option<TranscriptHook>,
    sessions: Mutex<BTreeMap<String, Arc<IntentSession>>>,
}

impl IntentService {
    pub fn new(
        gateway: Arc<dyn ToolGateway>,
        backends: Arc<dyn BackendFactory>,
        waiter: Arc<dyn ApprovalWaiter>,
        config: AgentConfig,
    ) -> Self {
        Self {
            gateway,
            backends,
            waiter,
            config,
            transcript_dir: None,
            on_transcript: None,
            sessions: Mutex::new(BTreeMap::new()),
        }
    }

    /// Writes `<intent_id>.jsonl` per run into `dir`.
    pub fn with_transcript_dir(mut self, dir: PathBuf) -> Self {
        self.transcript_dir = Some(dir);
        self
    }

    /// Called with `(intent_id, entry_count)` after every transcript append.
    pub fn with_transcript_hook(mut self, hook: impl Fn(&str, usize) + Send + Sync + 'static) -> Self {
        self.on_transcript = Some(Arc::new(hook));
        self
    }

    pub fn submit(&self, text: &str) -> std::io::Result<Arc<IntentSession>> {
        let mut sessions = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        let intent_id = format!("int-{:04}", sessions.len() + 1);
        let mut transcript = Transcript::new();
        if let Some(dir) = &self.transcript_dir {
            std::fs::create_dir_all(dir)?;
            transcript = transcript.with_file(&dir.join(format!("{intent_id}.jsonl")))?;
        }
        if let Some(hook) = self.on_transcript.clone() {
            let id = intent_id.clone();
            transcript = transcript.with_listener(move |n| hook(&id, n));
        }
        let session = Arc::new(IntentSession {
            intent_id: intent_id.clone(),
            text: text.to_owned(),
            submitted_at_ms: self.waiter.now_ms(),
            control: RunControl::default(),
            transcript,
            outcome: Mutex::new(None),
            finished: Condvar::new(),
        });
        sessions.insert(intent_id.clone(), session.clone());
        drop(sessions);

        let worker = session.clone();
        let gateway = self.gateway.clone();
        let waiter = self.waiter.clone();
        let mut backend = self.backends.create(text);
        let config = self.config.clone();
        std::thread::Builder::new()
            .name(format!("intent-{intent_id}"))
            .spawn(move || {
                let outcome = run_intent(
                    &worker.text,
                    backend.as_mut(),
                    gateway.as_ref(),
                    waiter.as_ref(),
                    &worker.transcript,
                    &worker.control,
                    &config,
                );
                *worker.outcome.lock().unwrap_or_else(|e| e.into_inner()) = Some(outcome);
                worker.finished.notify_all();
            })?;
        Ok(session)
    }

    pub fn get(&self, intent_id: &str) -> Option<Arc<IntentSession>> {
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(intent_id)
            .cloned()
    }

    pub fn list(&self) -> Vec<IntentStatus> {
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .map(|s| s.status())
            .collect()
    }

    pub fn stop(&self, intent_id: &str) -> Option<IntentStatus> {
        let session = self.get(intent_id)?;
        session.control.request_stop();
        Some(session.status())
    }
}
