//! Feedback text: the pysnooper-style rendering of an [`ExecutionOutcome`].

use serde::{Deserialize, Serialize};

use super::trace::{ChangeKind, ExecutionOutcome};

/// Default feedback budget in whitespace-delimited tokens.
pub const DEFAULT_BUDGET: usize = 1024;

/// The line inserted where a truncated trace was cut.
pub const ELISION_MARKER: &str = "…[truncated]…";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackText {
    pub text: String,
    pub truncated: bool,
}

fn escape_header(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

fn label(name: &str) -> String {
    format!("{name:.<15} ")
}

/// Renders the full, untruncated feedback text.
pub fn render_full(outcome: &ExecutionOutcome) -> String {
    let mut out = String::new();
    let header = outcome.result.as_deref().map(escape_header);
    out.push_str(&format!("-> {}\n\n", header.as_deref().unwrap_or("None")));
    for event in &outcome.events {
        out.push_str(&format!(
            "{:<9} {:>4} {}\n",
            event.kind.keyword(),
            event.line_no,
            event.source_line
        ));
        for change in &event.var_changes {
            let name = match change.kind {
                ChangeKind::New => "New var:",
                ChangeKind::Modified => "Modified var:",
            };
            out.push_str(&format!("{}{} = {}\n", label(name), change.name, change.value));
        }
        if let Some(exc) = &event.exception_text {
            out.push_str(&format!("{}{exc}\n", label("Exception:")));
        }
    }
    match (&outcome.exception, &outcome.result_repr) {
        (Some(exc), _) => {
            let reported = outcome.events.iter().any(|e| e.exception_text.is_some());
            if !reported {
                out.push_str(&format!("{}{exc}\n", label("Exception:")));
            }
            out.push_str("Call ended by exception\n");
        }
        (None, Some(value)) => out.push_str(&format!("{}{value}\n", label("Return value:"))),
        (None, None) => {}
    }
    out
}

/// Renders feedback, keeping at most `budget` whitespace-delimited tokens.
///
/// Over budget, the head and tail of the text are kept verbatim around a
/// single elision line; the marker counts as one token.
pub fn render_feedback(outcome: &ExecutionOutcome, budget: usize) -> FeedbackText {
    truncate_tokens(&render_full(outcome), budget)
}

pub fn truncate_tokens(text: &str, budget: usize) -> FeedbackText {
    let spans = token_spans(text);
    if spans.len() <= budget {
        return FeedbackText {
            text: text.to_string(),
            truncated: false,
        };
    }
    let keep = budget.saturating_sub(1);
    let head = keep / 2;
    let tail = keep - head;
    let mut out = String::new();
    if head > 0 {
        out.push_str(&text[..spans[head - 1].1]);
        out.push('\n');
    }
    out.push_str(ELISION_MARKER);
    out.push('\n');
    if tail > 0 {
        out.push_str(&text[spans[spans.len() - tail].0..]);
    }
    FeedbackText {
        text: out,
        truncated: true,
    }
}

fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}
