//! Bounded conversation context sent to the backend on each turn.

use super::backend::{Message, Role};

pub const DEFAULT_CONTEXT_ENTRIES: usize = 40;

/// System prompt, the intent, an optional digest line for elided history,
/// then the most recent `keep` history entries.
pub fn build_messages(
    system_prompt: &str,
    intent: &str,
    history: &[Message],
    keep: usize,
    digest: &str,
) -> Vec<Message> {
    let mut out = Vec::with_capacity(keep + 3);
    out.push(Message::new(Role::System, system_prompt));
    out.push(Message::new(Role::User, format!("Intent: {intent}")));
    let skip = history.len().saturating_sub(keep);
    if skip > 0 {
        let mut line = format!("[{skip} earlier entries omitted.");
        if !digest.is_empty() {
            line.push_str(&format!(" Observed so far: {digest}."));
        }
        line.push(']');
        out.push(Message::new(Role::User, line));
    }
    out.extend_from_slice(&history[skip..]);
    out
}
