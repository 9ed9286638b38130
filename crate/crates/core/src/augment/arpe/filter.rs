use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[[^\[\]]*\]").unwrap());
static RELATION_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b[a-z_][a-z0-9_]*(?:\.[a-z_][a-z0-9_]*)+\b").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    /// Bracketed text such as `[Entity]`.
    Placeholder,
    /// A dotted identifier such as `sports.sports_team.championships`.
    RelationToken,
    /// The answer label appears in the question.
    AnswerLeak,
}

pub fn reject_reason(question: &str, answer_label: &str) -> Option<Rejection> {
    if PLACEHOLDER.is_match(question) {
        return Some(Rejection::Placeholder);
    }
    if RELATION_TOKEN.is_match(question) {
        return Some(Rejection::RelationToken);
    }
    let label = answer_label.trim().to_lowercase();
    if !label.is_empty() && question.to_lowercase().contains(&label) {
        return Some(Rejection::AnswerLeak);
    }
    None
}

/// True when the question is kept.
pub fn filter_question(question: &str, answer_label: &str) -> bool {
    reject_reason(question, answer_label).is_none()
}
