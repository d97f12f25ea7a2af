//! Human-readable transcript rendering.

use serde_json::Value;

const MAX_CONTENT: usize = 160;

fn clip(text: &str) -> String {
    let one_line = text.replace('\n', " ");
    if one_line.chars().count() <= MAX_CONTENT {
        return one_line;
    }
    let cut: String = one_line.chars().take(MAX_CONTENT).collect();
    format!("{cut}...")
}

fn text(data: &Value, key: &str) -> String {
    match data.get(key) {
        Some(Value::String(s)) => s.clone(),
        Some(v) => v.to_string(),
        None => String::new(),
    }
}

/// Validator outcome for the tool call at `index`, read from the entries it produced.
pub fn verdict(entries: &[Value], index: usize) -> &'static str {
    for e in &entries[index + 1..] {
        match e["kind"].as_str().unwrap_or_default() {
            "status" => continue,
            "blocked" => return "blocked",
            "warning" => return "warned",
            "tool_call" if e["data"]["auto"] == true => return "needs approval",
            "observation" => return "allowed",
            _ => break,
        }
    }
    "no result"
}

/// One line per entry; `verdict` annotates tool calls when known.
pub fn entry_line(entry: &Value, verdict: Option<&str>) -> String {
    let seq = entry["seq"].as_u64().unwrap_or_default();
    let kind = entry["kind"].as_str().unwrap_or("?");
    let d = &entry["data"];
    let body = match kind {
        "intent" | "thought" | "final_answer" | "summary" => text(d, "text"),
        "tool_call" => {
            let auto = if d["auto"] == true { " (automatic)" } else { "" };
            let mut line = format!("{} {}{auto}", text(d, "name"), clip(&d["arguments"].to_string()));
            if let Some(v) = verdict {
                line.push_str(&format!("  -> {v}"));
            }
            line
        }
        "observation" => {
            let outcome = if d["is_error"] == true {
                format!("error[{}]", text(d, "error_kind"))
            } else {
                "ok".into()
            };
            format!("{} {outcome}: {}", text(d, "name"), clip(&d["content"].to_string()))
        }
        "parse_error" => format!("{} (attempt {})", text(d, "error"), text(d, "attempt")),
        "blocked" | "warning" => format!("[{}] {}", text(d, "rule"), text(d, "reason")),
        "approval_requested" => format!("{} for: {}", text(d, "token"), text(d, "action_summary")),
        "approval_resolved" => format!("{} -> {}", text(d, "token"), text(d, "state")),
        "ungrounded_claim" => format!("unverified figure {}", text(d, "claim")),
        "status" => match d.get("token") {
            Some(t) => format!("{} ({})", text(d, "status"), t.as_str().unwrap_or_default()),
            None => text(d, "status"),
        },
        _ => clip(&d.to_string()),
    };
    format!("{seq:>4}  {kind:<18} {body}")
}

/// Whole transcript, tool calls annotated with their validator verdicts.
pub fn render_trace(entries: &[Value]) -> String {
    let mut out = String::new();
    for (i, e) in entries.iter().enumerate() {
        let v = (e["kind"] == "tool_call").then(|| verdict(entries, i));
        out.push_str(&entry_line(e, v));
        out.push('\n');
    }
    out
}
