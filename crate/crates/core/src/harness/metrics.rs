//! Answer normalization, ground truth and per-sample scoring.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::exec::ExecutionOutcome;
use crate::world::iou;

/// The pinned stopword list, version 1.
pub const STOPWORDS_TXT: &str = include_str!("../../assets/stopwords.txt");

/// A grounding prediction counts as correct at or above this IoU.
pub const GROUNDING_IOU_THRESHOLD: f64 = 0.5;

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_TXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

/// Lowercases, strips punctuation at token edges and drops stopwords.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let words = stopwords();
    text.to_lowercase()
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()).to_string())
        .filter(|t| !t.is_empty() && !words.contains(t.as_str()))
        .collect()
}

/// Exact match after [`normalize_answer`].
pub fn answer_match(predicted: &str, gold: &str) -> bool {
    normalize_answer(predicted) == normalize_answer(gold)
}

/// An answer string for question answering or `[left, lower, right, upper]`
/// for grounding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroundTruth {
    Answer(String),
    Box([i64; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Qa,
    Grounding,
}

impl GroundTruth {
    pub fn task_kind(&self) -> TaskKind {
        match self {
            GroundTruth::Answer(_) => TaskKind::Qa,
            GroundTruth::Box(_) => TaskKind::Grounding,
        }
    }
}

fn as_f64(b: [i64; 4]) -> [f64; 4] {
    b.map(|v| v as f64)
}

/// Metric contribution of one outcome: 1/0 answer match for QA, IoU for
/// grounding (0 when the program did not return a patch).
pub fn score(outcome: &ExecutionOutcome, gt: &GroundTruth) -> f64 {
    match gt {
        GroundTruth::Answer(gold) => match &outcome.result {
            Some(r) if outcome.exception.is_none() && answer_match(r, gold) => 1.0,
            _ => 0.0,
        },
        GroundTruth::Box(gold) => match outcome.result_box {
            Some(b) if outcome.exception.is_none() => iou(&as_f64(b), &as_f64(*gold)),
            _ => 0.0,
        },
    }
}

/// Whether an outcome counts as matching the ground truth.
pub fn matches_ground_truth(outcome: &ExecutionOutcome, gt: &GroundTruth) -> bool {
    match gt {
        GroundTruth::Answer(_) => score(outcome, gt) == 1.0,
        GroundTruth::Box(_) => score(outcome, gt) >= GROUNDING_IOU_THRESHOLD,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_match_examples() {
        assert!(answer_match("the red jacket", "red jacket"));
        assert!(!answer_match("yes", "no"));
        assert!(!answer_match("2", "two"));
        assert!(answer_match("Yes.", "yes"));
        assert!(answer_match("It's a cat!", "it's cat"));
    }

    #[test]
    fn stopword_list_is_pinned() {
        assert_eq!(stopwords().len(), 30);
        assert!(!stopwords().contains("no"));
        assert!(!stopwords().contains("yes"));
    }

    #[test]
    fn ground_truth_json_forms() {
        let a: GroundTruth = serde_json::from_str("\"lamp\"").unwrap();
        assert_eq!(a, GroundTruth::Answer("lamp".into()));
        let b: GroundTruth = serde_json::from_str("[1, 2, 3, 4]").unwrap();
        assert_eq!(b, GroundTruth::Box([1, 2, 3, 4]));
        assert_eq!(b.task_kind(), TaskKind::Grounding);
    }
}
