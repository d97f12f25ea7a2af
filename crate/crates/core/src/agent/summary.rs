//! Final summaries: numeric claims in the model's answer are checked against
//! the numbers that actually appeared during the run.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub text: String,
    /// Numeric claims with no matching value in the grounding corpus.
    pub ungrounded: Vec<String>,
    pub from_template: bool,
}

fn claim_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Group 2 is a number not glued to a word, dash or dot on its left.
    RE.get_or_init(|| Regex::new(r"(^|[^\w.\-])(\d[\d,]*(?:\.\d+)?)").expect("valid regex"))
}

fn corpus_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+(?:\.\d+)?(?:[eE][-+]?\d+)?").expect("valid regex"))
}

/// Every number mentioned anywhere in `texts`.
pub fn corpus_numbers<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
    let mut out: Vec<f64> = texts
        .into_iter()
        .flat_map(|t| corpus_re().find_iter(t).filter_map(|m| m.as_str().parse().ok()))
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn is_grounded(claim: &str, corpus: &[f64]) -> bool {
    let plain = claim.replace(',', "");
    let Ok(value) = plain.parse::<f64>() else {
        return true;
    };
    let decimals = plain.split_once('.').map_or(0, |(_, d)| d.len()) as i32;
    let scale = 10f64.powi(decimals);
    corpus.iter().any(|&v| {
        (v - value).abs() <= 1e-9 * value.abs().max(1.0) || ((v * scale).round() / scale - value).abs() < 1e-9
    })
}

/// Numeric claims in `text` that match nothing in `corpus`.
pub fn ungrounded_claims(text: &str, corpus: &[f64]) -> Vec<String> {
    claim_re()
        .captures_iter(text)
        .map(|c| c[2].trim_end_matches(',').to_owned())
        .filter(|claim| !is_grounded(claim, corpus))
        .collect()
}

fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for i in 0..bytes.len() {
        let end_mark = matches!(bytes[i], b'.' | b'!' | b'?');
        let next_space = bytes.get(i + 1).is_none_or(|b| b.is_ascii_whitespace());
        if end_mark && next_space {
            out.push(text[start..=i].trim());
            start = i + 1;
        }
    }
    if start < text.len() && !text[start..].trim().is_empty() {
        out.push(text[start..].trim());
    }
    out
}

/// Keeps the answer's sentences whose figures are all grounded.
pub fn summarize(final_answer: &str, corpus: &[f64]) -> Summary {
    let ungrounded = ungrounded_claims(final_answer, corpus);
    if ungrounded.is_empty() {
        return Summary {
            text: final_answer.trim().to_owned(),
            ungrounded,
            from_template: false,
        };
    }
    let kept: Vec<&str> = sentences(final_answer)
        .into_iter()
        .filter(|s| ungrounded_claims(s, corpus).is_empty())
        .collect();
    let mut text = kept.join(" ");
    if !text.is_empty() {
        text.push(' ');
    }
    text.push_str(&format!(
        "[{} unverified figure(s) removed: {}]",
        ungrounded.len(),
        ungrounded.join(", ")
    ));
    Summary {
        text,
        ungrounded,
        from_template: false,
    }
}

/// Deterministic summary used when there is no usable final answer.
pub fn template_summary(intent: &str, outcome: &str, blocker: Option<&str>, completed_tools: &[String]) -> Summary {
    let mut text = format!("Intent \"{intent}\" {outcome}.");
    if let Some(b) = blocker {
        text.push_str(&format!(" Last blocker: {b}."));
    }
    if completed_tools.is_empty() {
        text.push_str(" No tool calls completed.");
    } else {
        text.push_str(&format!(" Completed tool calls: {}.", completed_tools.join(", ")));
    }
    Summary {
        text,
        ungrounded: Vec::new(),
        from_template: true,
    }
}
