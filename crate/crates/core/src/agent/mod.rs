//! Tool-using agent: turn grammar, prompt, backends, critical-thinking
//! checks, the run loop and intent sessions.

pub mod backend;
pub mod context;
pub mod critic;
pub mod prompt;
pub mod runner;
pub mod service;
pub mod summary;
pub mod transcript;
pub mod turn;

pub use backend::{BackendFactory, LlmBackend, Message, Role, ScriptFile, ScriptedBackend, ScriptedFactory};
pub use runner::{run_intent, AgentConfig, ApprovalWaiter, IntentOutcome, RunControl, RunStatus};
pub use service::{IntentService, IntentSession, IntentStatus};
pub use transcript::{EntryKind, Transcript, TranscriptEntry};
pub use turn::{parse_turn, Turn, TurnError};
