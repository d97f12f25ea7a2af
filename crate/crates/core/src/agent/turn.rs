//! Turn grammar: every model reply must carry exactly one JSON object with
//! exactly one of `thought`, `tool_call` or `final_answer`.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    Thought(String),
    ToolCall {
        name: String,
        arguments: Map<String, Value>,
    },
    FinalAnswer(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TurnError {
    #[error("reply contains no JSON object")]
    NoJson,
    #[error("reply object has none of thought, tool_call, final_answer")]
    NoKey,
    #[error("reply object has more than one of thought, tool_call, final_answer: {0}")]
    MultipleKeys(String),
    #[error("'{0}' must be a string")]
    NotText(&'static str),
    #[error("tool_call must be an object with a string 'name' and an object 'arguments'")]
    BadToolCall,
}

const KEYS: [&str; 3] = ["thought", "tool_call", "final_answer"];

/// First balanced top-level JSON object in `text`, skipping prose and fences.
pub fn first_json_object(text: &str) -> Option<Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

pub fn parse_turn(text: &str) -> Result<Turn, TurnError> {
    let obj = first_json_object(text).ok_or(TurnError::NoJson)?;
    let present: Vec<&str> = KEYS.iter().copied().filter(|k| obj.contains_key(*k)).collect();
    match present.as_slice() {
        [] => Err(TurnError::NoKey),
        ["thought"] => match &obj["thought"] {
            Value::String(s) => Ok(Turn::Thought(s.clone())),
            _ => Err(TurnError::NotText("thought")),
        },
        ["final_answer"] => match &obj["final_answer"] {
            Value::String(s) => Ok(Turn::FinalAnswer(s.clone())),
            _ => Err(TurnError::NotText("final_answer")),
        },
        ["tool_call"] => {
            let call = obj["tool_call"].as_object().ok_or(TurnError::BadToolCall)?;
            let name = call
                .get("name")
                .and_then(Value::as_str)
                .filter(|n| !n.is_empty())
                .ok_or(TurnError::BadToolCall)?;
            let arguments = match call.get("arguments") {
                None | Some(Value::Null) => Map::new(),
                Some(Value::Object(m)) => m.clone(),
                Some(_) => return Err(TurnError::BadToolCall),
            };
            Ok(Turn::ToolCall {
                name: name.to_owned(),
                arguments,
            })
        }
        many => Err(TurnError::MultipleKeys(many.join(", "))),
    }
}

impl Turn {
    /// Canonical single-object rendering, as the model is asked to produce.
    pub fn to_json(&self) -> Value {
        match self {
            Turn::Thought(t) => serde_json::json!({ "thought": t }),
            Turn::FinalAnswer(t) => serde_json::json!({ "final_answer": t }),
            Turn::ToolCall { name, arguments } => {
                serde_json::json!({ "tool_call": { "name": name, "arguments": arguments } })
            }
        }
    }
}
