//! The plan, act, observe loop.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::backend::{BackendError, LlmBackend, Message, Role};
use super::context::{build_messages, DEFAULT_CONTEXT_ENTRIES};
use super::critic::{Critic, Verdict};
use super::prompt::build_system_prompt;
use super::summary::{corpus_numbers, summarize, template_summary, Summary};
use super::transcript::{EntryKind, Transcript};
use super::turn::{parse_turn, Turn};
use crate::gateway::{ToolCall, ToolDescriptor, ToolGateway};
use crate::tools::{ApprovalState, EngineHandle};

pub const DEFAULT_MAX_ITERATIONS: usize = 25;
pub const DEFAULT_MAX_REPROMPTS: u32 = 2;

pub const CORRECTIVE_PROMPT: &str = "Your last reply was not a valid turn. Respond with exactly one JSON object \
using exactly one of the keys thought, tool_call, or final_answer.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub max_iterations: usize,
    pub context_entries: usize,
    pub max_reprompts: u32,
    /// Backend attempts per turn before the run fails.
    pub backend_attempts: u32,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            context_entries: DEFAULT_CONTEXT_ENTRIES,
            max_reprompts: DEFAULT_MAX_REPROMPTS,
            backend_attempts: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    AwaitingApproval,
    Done,
    Failed,
    Stopped,
}

impl RunStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunStatus::Done | RunStatus::Failed | RunStatus::Stopped)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub status: RunStatus,
    pub iteration: usize,
    pub pending_token: Option<String>,
}

/// Shared between the worker running an intent and its observers.
pub struct RunControl {
    stop: AtomicBool,
    state: Mutex<RunState>,
}

impl Default for RunControl {
    fn default() -> Self {
        Self {
            stop: AtomicBool::new(false),
            state: Mutex::new(RunState {
                status: RunStatus::Running,
                iteration: 0,
                pending_token: None,
            }),
        }
    }
}

impl RunControl {
    pub fn request_stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    pub fn stop_requested(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    pub fn state(&self) -> RunState {
        self.state.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn update(&self, f: impl FnOnce(&mut RunState)) {
        f(&mut self.state.lock().unwrap_or_else(|e| e.into_inner()));
    }
}

/// Source of virtual time and approval decisions for a run.
pub trait ApprovalWaiter: Send + Sync {
    fn now_ms(&self) -> u64;
    /// Blocks until the token leaves `pending` or `stop` is set; returns the state seen last.
    fn wait(&self, token: &str, stop: &AtomicBool) -> ApprovalState;
}

impl ApprovalWaiter for EngineHandle {
    fn now_ms(&self) -> u64 {
        self.read().now_ms()
    }

    fn wait(&self, token: &str, stop: &AtomicBool) -> ApprovalState {
        loop {
            let seen = self.generation();
            let state = self
                .read()
                .approvals
                .get(token)
                .map_or(ApprovalState::Expired, |t| t.state);
            if state != ApprovalState::Pending || stop.load(Ordering::SeqCst) {
                return state;
            }
            self.wait_change(seen, Duration::from_millis(100));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentOutcome {
    pub status: RunStatus,
    pub goal_achieved: bool,
    pub final_answer: Option<String>,
    pub summary: Summary,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

struct Run<'a> {
    intent: &'a str,
    gateway: &'a dyn ToolGateway,
    waiter: &'a dyn ApprovalWaiter,
    transcript: &'a Transcript,
    control: &'a RunControl,
    config: &'a AgentConfig,
    tools: Vec<ToolDescriptor>,
    critic: Critic,
    history: Vec<Message>,
    grounding: Vec<String>,
    completed: Vec<String>,
    last_blocker: Option<String>,
    iteration: usize,
}

enum Step {
    Continue,
    Finish(IntentOutcome),
}

impl<'a> Run<'a> {
    fn log(&self, kind: EntryKind, data: Value) {
        self.transcript.append(self.waiter.now_ms(), kind, data);
    }

    fn set_status(&self, status: RunStatus, token: Option<String>) {
        self.control.update(|s| {
            s.status = status;
            s.pending_token = token.clone();
        });
        let mut data = json!({ "status": status });
        if let Some(t) = token {
            data["token"] = json!(t);
        }
        self.log(EntryKind::Status, data);
    }

    fn observe(&mut self, text: String) {
        self.history.push(Message::new(Role::User, text));
    }

    fn finish(&self, status: RunStatus, reason: &str) -> IntentOutcome {
        let outcome = match status {
            RunStatus::Stopped => "was stopped by the operator",
            _ => "failed",
        };
        let summary = template_summary(
            self.intent,
            &format!("{outcome}: {reason}"),
            self.last_blocker.as_deref(),
            &self.completed,
        );
        self.log(EntryKind::Summary, json!({ "text": summary.text, "template": true }));
        self.set_status(status, None);
        IntentOutcome {
            status,
            goal_achieved: false,
            final_answer: None,
            summary,
            iterations: self.iteration,
            reason: Some(reason.to_owned()),
        }
    }

    fn generate(&mut self, backend: &mut dyn LlmBackend) -> Result<Option<Turn>, BackendError> {
        let digest = self.critic.digest();
        let prompt = build_system_prompt(&self.tools).expect("catalog checked non-empty");
        for attempt in 0..=self.config.max_reprompts {
            let messages = build_messages(
                &prompt,
                self.intent,
                &self.history,
                self.config.context_entries,
                &digest,
            );
            let mut raw = Err(BackendError::Unavailable("no attempt made".into()));
            for _ in 0..self.config.backend_attempts.max(1) {
                raw = backend.complete(&messages);
                if raw.is_ok() {
                    break;
                }
            }
            let raw = raw?;
            self.history.push(Message::new(Role::Assistant, raw.clone()));
            match parse_turn(&raw) {
                Ok(turn) => return Ok(Some(turn)),
                Err(e) => {
                    self.log(
                        EntryKind::ParseError,
                        json!({ "raw": raw, "error": e.to_string(), "attempt": attempt + 1 }),
                    );
                    self.observe(format!("{CORRECTIVE_PROMPT} Problem: {e}."));
                }
            }
        }
        Ok(None)
    }

    fn dispatch(&mut self, name: &str, arguments: Map<String, Value>) -> Result<Value, String> {
        let call = ToolCall {
            call_id: String::new(),
            name: name.to_owned(),
            arguments,
        };
        let result = self
            .gateway
            .call_tool(&call)
            .map_err(|e| e.to_string())?;
        self.log(
            EntryKind::Observation,
            json!({
                "call_id": result.call_id,
                "name": name,
                "arguments": call.arguments,
                "is_error": result.is_error,
                "error_kind": result.error_kind,
                "content": result.content,
            }),
        );
        self.grounding.push(Value::Object(call.arguments.clone()).to_string());
        self.grounding.push(result.content.to_string());
        if result.is_error {
            self.last_blocker = result.error_message().map(str::to_owned);
            self.observe(format!("Error from {name}: {}", result.content));
        } else {
            self.critic.observe(&result.content);
            self.completed.push(name.to_owned());
            self.observe(format!("Observation from {name}: {}", result.content));
        }
        Ok(result.content)
    }

    fn block(&mut self, kind: EntryKind, rule: &str, reason: String) {
        self.log(kind, json!({ "rule": rule, "reason": reason }));
        self.last_blocker = Some(reason.clone());
        self.observe(reason);
    }

    fn tool_call(&mut self, name: String, mut arguments: Map<String, Value>) -> Step {
        self.log(
            EntryKind::ToolCall,
            json!({ "name": name, "arguments": arguments }),
        );
        let descriptor = self.tools.iter().find(|t| t.name == name).cloned();
        match self.critic.judge(&name, descriptor.as_ref(), &arguments) {
            Verdict::Invalid(reason) => {
                self.block(EntryKind::Blocked, "structured_validation", reason);
                return Step::Continue;
            }
            Verdict::Unverified(reason) => {
                self.block(EntryKind::Blocked, "assumptions_blocking", reason);
                return Step::Continue;
            }
            Verdict::Repeated(reason) => {
                self.block(EntryKind::Warning, "goal_tracking", reason);
                return Step::Continue;
            }
            Verdict::NeedsApproval => {
                let summary = format!("{name} {}", Value::Object(arguments.clone()));
                let mut request = Map::new();
                request.insert("action_summary".into(), json!(summary));
                self.log(
                    EntryKind::ToolCall,
                    json!({ "name": "request_confirmation", "arguments": request, "auto": true }),
                );
                let content = match self.dispatch("request_confirmation", request) {
                    Ok(c) => c,
                    Err(e) => return Step::Finish(self.finish(RunStatus::Failed, &format!("gateway unreachable: {e}"))),
                };
                let Some(token) = content.get("token").and_then(Value::as_str).map(str::to_owned) else {
                    return Step::Continue;
                };
                self.log(
                    EntryKind::ApprovalRequested,
                    json!({ "token": token, "action_summary": summary }),
                );
                self.set_status(RunStatus::AwaitingApproval, Some(token.clone()));
                let state = self.waiter.wait(&token, &self.control.stop);
                self.log(EntryKind::ApprovalResolved, json!({ "token": token, "state": state }));
                match state {
                    ApprovalState::Approved => {
                        self.set_status(RunStatus::Running, None);
                        arguments.insert("approval_token".into(), json!(token));
                    }
                    ApprovalState::Denied => {
                        self.last_blocker = Some(format!("operator denied {name}"));
                        return Step::Finish(self.finish(RunStatus::Failed, &format!("operator denied approval {token}")));
                    }
                    ApprovalState::Expired => {
                        return Step::Finish(self.finish(RunStatus::Failed, &format!("approval {token} expired")));
                    }
                    ApprovalState::Pending => {
                        return Step::Finish(self.finish(RunStatus::Stopped, "stop requested while awaiting approval"));
                    }
                }
            }
            Verdict::Allow => {}
        }
        match self.dispatch(&name, arguments) {
            Ok(_) => Step::Continue,
            Err(e) => Step::Finish(self.finish(RunStatus::Failed, &format!("gateway unreachable: {e}"))),
        }
    }

    fn final_answer(&mut self, answer: String, revised: &mut bool) -> Step {
        self.log(EntryKind::FinalAnswer, json!({ "text": answer }));
        let mut texts: Vec<&str> = vec![self.intent];
        texts.extend(self.grounding.iter().map(String::as_str));
        let corpus = corpus_numbers(texts);
        let summary = summarize(&answer, &corpus);
        for claim in &summary.ungrounded {
            self.log(EntryKind::UngroundedClaim, json!({ "claim": claim }));
        }
        if !summary.ungrounded.is_empty() && !*revised {
            *revised = true;
            self.observe(format!(
                "Your final answer cites figures that appear in no tool result: {}. Revise it using only observed values.",
                summary.ungrounded.join(", ")
            ));
            return Step::Continue;
        }
        let goal_achieved = summary.ungrounded.is_empty();
        self.log(
            EntryKind::Summary,
            json!({ "text": summary.text, "goal_achieved": goal_achieved }),
        );
        self.set_status(RunStatus::Done, None);
        Step::Finish(IntentOutcome {
            status: RunStatus::Done,
            goal_achieved,
            final_answer: Some(answer),
            summary,
            iterations: self.iteration,
            reason: None,
        })
    }
}

/// Runs one intent to completion. Every gateway call, turn and validator
/// decision is appended to `transcript`.
pub fn run_intent(
    intent: &str,
    backend: &mut dyn LlmBackend,
    gateway: &dyn ToolGateway,
    waiter: &dyn ApprovalWaiter,
    transcript: &Transcript,
    control: &RunControl,
    config: &AgentConfig,
) -> IntentOutcome {
    let mut run = Run {
        intent,
        gateway,
        waiter,
        transcript,
        control,
        config,
        tools: Vec::new(),
        critic: Critic::new(),
        history: Vec::new(),
        grounding: Vec::new(),
        completed: Vec::new(),
        last_blocker: None,
        iteration: 0,
    };
    run.log(EntryKind::Intent, json!({ "text": intent }));
    run.set_status(RunStatus::Running, None);
    run.tools = match gateway.list_tools() {
        Ok(tools) if !tools.is_empty() => tools,
        Ok(_) => return run.finish(RunStatus::Failed, "tool catalog is empty"),
        Err(e) => return run.finish(RunStatus::Failed, &e.to_string()),
    };
    let mut revised = false;
    loop {
        if control.stop_requested() {
            return run.finish(RunStatus::Stopped, "stop requested");
        }
        if run.iteration >= config.max_iterations {
            return run.finish(
                RunStatus::Failed,
                &format!("no final answer within {} iterations", config.max_iterations),
            );
        }
        run.iteration += 1;
        control.update(|s| s.iteration = run.iteration);
        let turn = match run.generate(backend) {
            Ok(t) => t,
            Err(e) => return run.finish(RunStatus::Failed, &e.to_string()),
        };
        let step = match turn {
            None => {
                run.last_blocker = Some("unparseable model reply".into());
                Step::Continue
            }
            Some(Turn::Thought(text)) => {
                run.log(EntryKind::Thought, json!({ "text": text }));
                run.observe("Continue.".into());
                Step::Continue
            }
            Some(Turn::ToolCall { name, arguments }) => run.tool_call(name, arguments),
            Some(Turn::FinalAnswer(answer)) => run.final_answer(answer, &mut revised),
        };
        if let Step::Finish(outcome) = step {
            return outcome;
        }
    }
}
