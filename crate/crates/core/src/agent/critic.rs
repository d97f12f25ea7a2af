//! Critical-thinking checks applied to every proposed tool call before it
//! reaches the gateway.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{Map, Value};

use crate::gateway::{EntityKind, ToolDescriptor};

/// Identical calls allowed before a warning replaces the result.
pub const REPEAT_LIMIT: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Allow,
    /// Schema or existence failure; reason goes back to the model.
    Invalid(String),
    /// Mutating call naming an entity never seen in a tool result.
    Unverified(String),
    /// Identical call made more than [`REPEAT_LIMIT`] times.
    Repeated(String),
    /// Mutating call without a token: route through the operator.
    NeedsApproval,
}

#[derive(Debug, Default, Clone)]
pub struct Critic {
    observed: BTreeMap<EntityKind, BTreeSet<String>>,
    calls: HashMap<String, u32>,
}

fn entity_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn kind_for_key(key: &str) -> Option<EntityKind> {
    match key {
        "slice" | "slice_name" => Some(EntityKind::Slice),
        "collection" => Some(EntityKind::Collection),
        "session_id" => Some(EntityKind::Session),
        "action_id" => Some(EntityKind::Action),
        _ => None,
    }
}

/// Lists whose elements carry their identity under `name`.
fn kind_for_list(key: &str) -> Option<EntityKind> {
    match key {
        "slices" => Some(EntityKind::Slice),
        "collections" => Some(EntityKind::Collection),
        _ => None,
    }
}

impl Critic {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observed(&self) -> &BTreeMap<EntityKind, BTreeSet<String>> {
        &self.observed
    }

    pub fn has_observed(&self, kind: EntityKind, name: &str) -> bool {
        self.observed.get(&kind).is_some_and(|s| s.contains(name))
    }

    /// Records every entity named in a successful tool result.
    pub fn observe(&mut self, content: &Value) {
        self.walk(content, None);
    }

    fn add(&mut self, kind: EntityKind, v: &Value) {
        if let Some(name) = entity_text(v) {
            self.observed.entry(kind).or_default().insert(name);
        }
    }

    fn walk(&mut self, value: &Value, list_kind: Option<EntityKind>) {
        match value {
            Value::Object(map) => {
                if let (Some(kind), Some(name)) = (list_kind, map.get("name")) {
                    self.add(kind, name);
                }
                for (k, v) in map {
                    if let Some(kind) = kind_for_key(k) {
                        self.add(kind, v);
                    }
                    self.walk(v, kind_for_list(k));
                }
            }
            Value::Array(items) => {
                for item in items {
                    self.walk(item, list_kind);
                }
            }
            _ => {}
        }
    }

    /// Entity-typed arguments not yet seen in any observation.
    pub fn unverified(&self, tool: &ToolDescriptor, args: &Map<String, Value>) -> Vec<String> {
        let mut out = Vec::new();
        for (name, spec) in &tool.params_schema.properties {
            let (Some(kind), Some(value)) = (spec.entity, args.get(name)) else {
                continue;
            };
            if let Some(text) = entity_text(value) {
                if !self.has_observed(kind, &text) {
                    let label = serde_json::to_value(kind)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_owned))
                        .unwrap_or_default();
                    out.push(format!("{label} '{text}'"));
                }
            }
        }
        out
    }

    /// Counts the call and returns how often this exact call has been made.
    pub fn record_call(&mut self, name: &str, args: &Map<String, Value>) -> u32 {
        let key = format!("{name}{}", Value::Object(args.clone()));
        let n = self.calls.entry(key).or_default();
        *n += 1;
        *n
    }

    /// Decides what to do with a proposed call. `tool` is `None` for unknown names.
    pub fn judge(
        &mut self,
        name: &str,
        tool: Option<&ToolDescriptor>,
        args: &Map<String, Value>,
    ) -> Verdict {
        let Some(tool) = tool else {
            return Verdict::Invalid(format!("unknown tool '{name}'; call only tools from the list"));
        };
        if let Err(v) = tool.params_schema.validate_map(args) {
            return Verdict::Invalid(format!("{name}: {v}"));
        }
        let mutating = tool.is_mutating_call(args);
        if mutating {
            let missing = self.unverified(tool, args);
            if !missing.is_empty() {
                return Verdict::Unverified(format!(
                    "unverified assumption: {}; look it up with a data tool first",
                    missing.join(", ")
                ));
            }
        }
        let count = self.record_call(name, args);
        if count > REPEAT_LIMIT {
            return Verdict::Repeated(format!(
                "warning: identical call to {name} made {count} times; use the earlier result or change approach"
            ));
        }
        if mutating && !args.contains_key("approval_token") {
            return Verdict::NeedsApproval;
        }
        Verdict::Allow
    }

    /// One-line description of what has been observed, for context digests.
    pub fn digest(&self) -> String {
        let parts: Vec<String> = self
            .observed
            .iter()
            .map(|(k, names)| {
                let label = serde_json::to_value(k)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default();
                format!("{label}: {}", names.iter().cloned().collect::<Vec<_>>().join(", "))
            })
            .collect();
        parts.join("; ")
    }
}
