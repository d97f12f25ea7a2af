//! Random model replies: the parser never yields more than one turn kind,
//! never panics, and every rejected reply is answered with a corrective prompt.

use std::sync::atomic::AtomicBool;

use netintent_core::agent::backend::BackendError;
use netintent_core::agent::runner::CORRECTIVE_PROMPT;
use netintent_core::agent::{
    parse_turn, run_intent, AgentConfig, ApprovalWaiter, EntryKind, LlmBackend, Message, RunControl, Transcript, Turn,
};
use netintent_core::gateway::{Gateway, ParamsSchema, Registry, ToolDescriptor, ToolGroup};
use netintent_core::tools::ApprovalState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

const FRAGMENTS: &[&str] = &[
    "{", "}", "\"thought\"", "\"tool_call\"", "\"final_answer\"", ":", ",", "\"x\"", "\"done\"", "42", "null",
    "[", "]", "```json\n", "\n```", "Sure, ", " ", "{\"name\": \"list_collections\"}", "{\"arguments\": {}}",
    "\"name\"", "\"arguments\"", "true", "\\", "\"", "é", "{}",
];

fn random_text(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..4) {
        // Structured but possibly conflicting objects.
        0 => {
            let mut obj = Map::new();
            for key in ["thought", "tool_call", "final_answer", "other"] {
                if rng.random_bool(0.4) {
                    let v = match rng.random_range(0..4) {
                        0 => json!("text"),
                        1 => json!({ "name": "list_collections", "arguments": {} }),
                        2 => json!(7),
                        _ => json!({ "name": "", "arguments": [] }),
                    };
                    obj.insert(key.into(), v);
                }
            }
            let prefix = if rng.random_bool(0.3) { "Here: {oops} " } else { "" };
            format!("{prefix}{}", Value::Object(obj))
        }
        // Two objects back to back; only the first may count.
        1 => format!(
            "{} {}",
            json!({ "thought": "first" }),
            json!({ "final_answer": "second" })
        ),
        _ => (0..rng.random_range(0..30))
            .map(|_| FRAGMENTS[rng.random_range(0..FRAGMENTS.len())])
            .collect(),
    }
}

/// Brute force: the earliest '{' that starts a parseable object, taking the
/// shortest such slice.
fn oracle_object(text: &str) -> Option<Map<String, Value>> {
    let opens: Vec<usize> = text.match_indices('{').map(|(i, _)| i).collect();
    let closes: Vec<usize> = text.match_indices('}').map(|(i, _)| i).collect();
    for &i in &opens {
        for &j in closes.iter().filter(|&&j| j > i) {
            if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&text[i..=j]) {
                return Some(map);
            }
        }
    }
    None
}

fn oracle_turn(text: &str) -> Option<Turn> {
    let obj = oracle_object(text)?;
    let keys: Vec<&str> = ["thought", "tool_call", "final_answer"]
        .into_iter()
        .filter(|k| obj.contains_key(*k))
        .collect();
    if keys.len() != 1 {
        return None;
    }
    match (keys[0], &obj[keys[0]]) {
        ("thought", Value::String(s)) => Some(Turn::Thought(s.clone())),
        ("final_answer", Value::String(s)) => Some(Turn::FinalAnswer(s.clone())),
        ("tool_call", Value::Object(call)) => {
            let name = call.get("name")?.as_str().filter(|n| !n.is_empty())?;
            let arguments = match call.get("arguments") {
                None | Some(Value::Null) => Map::new(),
                Some(Value::Object(m)) => m.clone(),
                Some(_) => return None,
            };
            Some(Turn::ToolCall { name: name.into(), arguments })
        }
        _ => None,
    }
}

struct Replay {
    first: String,
    seen: Vec<Vec<Message>>,
}

impl LlmBackend for Replay {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError> {
        self.seen.push(messages.to_vec());
        Ok(if self.seen.len() == 1 {
            self.first.clone()
        } else {
            json!({ "final_answer": "ok" }).to_string()
        })
    }
}

struct NoApprovals;

impl ApprovalWaiter for NoApprovals {
    fn now_ms(&self) -> u64 {
        0
    }

    fn wait(&self, _token: &str, _stop: &AtomicBool) -> ApprovalState {
        ApprovalState::Denied
    }
}

fn tiny_gateway() -> Gateway {
    let mut reg = Registry::new();
    reg.register(
        ToolDescriptor::new("list_collections", ToolGroup::DataRetrieval, "List", ParamsSchema::new()),
        |_| Ok(json!({ "collections": [] })),
    )
    .unwrap();
    Gateway::new(reg)
}

pub fn acceptance() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let gateway = tiny_gateway();
    let (mut accepted, mut rejected) = (0, 0);
    for _ in 0..10_000 {
        let text = random_text(&mut rng);
        let parsed = std::panic::catch_unwind(|| parse_turn(&text)).map_err(|_| format!("parser panicked on {text:?}"))?;
        if parsed.clone().ok() != oracle_turn(&text) {
            return Err(format!("{text:?}: parsed {parsed:?}"));
        }
        if parsed.is_ok() {
            accepted += 1;
            continue;
        }
        rejected += 1;
        let mut backend = Replay { first: text.clone(), seen: Vec::new() };
        let transcript = Transcript::new();
        run_intent(
            "probe",
            &mut backend,
            &gateway,
            &NoApprovals,
            &transcript,
            &RunControl::default(),
            &AgentConfig::default(),
        );
        let errors = transcript.entries().iter().filter(|e| e.kind == EntryKind::ParseError).count();
        let corrected = backend
            .seen
            .get(1)
            .and_then(|m| m.last())
            .is_some_and(|m| m.content.starts_with(CORRECTIVE_PROMPT));
        if errors != 1 || !corrected {
            return Err(format!("{text:?}: {errors} parse errors logged, corrective prompt sent: {corrected}"));
        }
    }
    if accepted < 1_000 || rejected < 1_000 {
        return Err(format!("unbalanced corpus: {accepted} accepted, {rejected} rejected"));
    }
    Ok(format!("10000 replies: {accepted} single-variant turns, {rejected} rejected with a corrective prompt"))
}

#[test]
fn ten_thousand_replies() {
    acceptance().unwrap();
}
