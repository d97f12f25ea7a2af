//! System prompt: operating directives, the reply grammar and the tool list.

use serde_json::Value;

use crate::gateway::{Mutation, ToolDescriptor};

pub const DIRECTIVES: [&str; 7] = [
    "Call List Tools: read the tool list below to understand which tool to use for each step.",
    "Plan First: before acting, write a short numbered plan as a thought.",
    "Discover Context: look up every slice, collection or session you intend to act on with a data tool before changing it. Never assume a name exists.",
    "Feasibility Check: run feasibility_check before any policy change and stop if it reports infeasible.",
    "Follow Your Plan: execute one tool call per reply, in plan order. State-changing tools are sent to the operator for approval automatically.",
    "Explain Observations: after each tool result, state in a thought what it tells you.",
    "Finalize Clearly: finish with a final_answer that states what was done, using only values that appeared in tool results.",
];

pub const GRAMMAR: &str = "Always answer in JSON using exactly one of the keys thought, tool_call, or final_answer:\n\
{\"thought\": \"...\"}\n\
{\"tool_call\": {\"name\": \"<tool>\", \"arguments\": {...}}}\n\
{\"final_answer\": \"...\"}\n\
Reply with one JSON object and nothing else.";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("tool catalog is empty")]
pub struct EmptyCatalog;

fn stanza(tool: &ToolDescriptor) -> String {
    let params = serde_json::to_value(&tool.params_schema).unwrap_or(Value::Null);
    let gate = match tool.mutates {
        Mutation::Never => "",
        Mutation::Always => " [changes network state; needs operator approval]",
        Mutation::WhenArg { .. } => " [some operations change network state; need operator approval]",
    };
    format!(
        "### {}\n{}{}\nparameters: {}\n",
        tool.name, tool.description, gate, params
    )
}

/// Deterministic for a fixed catalog.
pub fn build_system_prompt(catalog: &[ToolDescriptor]) -> Result<String, EmptyCatalog> {
    if catalog.is_empty() {
        return Err(EmptyCatalog);
    }
    let mut out = String::from(
        "You are a network operations agent for a 5G core. You turn operator intents into \
         verified actions using the tools below.\n\nDirectives:\n",
    );
    for (i, d) in DIRECTIVES.iter().enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, d));
    }
    out.push('\n');
    out.push_str(GRAMMAR);
    out.push_str("\n\nTools:\n");
    for tool in catalog {
        out.push_str(&stanza(tool));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ParamsSchema, ToolGroup};

    fn catalog(n: usize) -> Vec<ToolDescriptor> {
        (0..n)
            .map(|i| {
                ToolDescriptor::new(
                    &format!("tool_{i}"),
                    ToolGroup::DataRetrieval,
                    "does a thing",
                    ParamsSchema::new(),
                )
            })
            .collect()
    }

    #[test]
    fn renders_every_tool_and_key() {
        let prompt = build_system_prompt(&catalog(8)).unwrap();
        assert_eq!(prompt.matches("\n### ").count(), 8);
        for key in ["thought", "tool_call", "final_answer"] {
            assert!(prompt.contains(key));
        }
        for i in 1..=7 {
            assert!(prompt.contains(&format!("\n{i}. ")));
        }
        assert_eq!(prompt, build_system_prompt(&catalog(8)).unwrap());
    }

    #[test]
    fn empty_catalog_is_an_error() {
        assert_eq!(build_system_prompt(&[]), Err(EmptyCatalog));
    }
}
