//! Synthetic (question, logical form) generation.
//!
//! * [`spqg`] writes single-hop questions from relation templates.
//! * [`spqr`] paraphrases existing training questions.
//! * [`arpe`] explores the graph backwards from known answers along the
//!   shapes of frequent training forms.

pub mod arpe;
pub mod spqg;
pub mod spqr;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};
use crate::lf::SExpr;
use crate::llm::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Original,
    Spqg,
    Spqr,
    Arpe,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Original => "original",
            Source::Spqg => "spqg",
            Source::Spqr => "spqr",
            Source::Arpe => "arpe",
        })
    }
}

/// One training example. `answers` holds answer ids when known (needed by
/// ARPE); it is omitted from JSON when empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QALPair {
    pub question: String,
    #[serde(rename = "s_expression")]
    pub logical_form: SExpr,
    pub source: Source,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub answers: Vec<String>,
}

impl QALPair {
    pub fn new(question: impl Into<String>, logical_form: SExpr, source: Source) -> Self {
        Self {
            question: question.into(),
            logical_form,
            source,
            meta: BTreeMap::new(),
            answers: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.insert(key.to_owned(), value.into());
        self
    }

    pub fn qid(&self) -> Option<&str> {
        self.meta.get("qid").map(String::as_str)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    File(#[from] JsonlError),
}

pub fn write_pairs(path: &Path, pairs: &[QALPair]) -> Result<(), AugmentError> {
    Ok(jsonl::write(path, pairs)?)
}

pub fn read_pairs(path: &Path) -> Result<Vec<QALPair>, AugmentError> {
    Ok(jsonl::read(path)?.into_iter().map(|(_, p)| p).collect())
}

/// Lowercased with whitespace runs collapsed; used for distinctness checks.
pub fn normalize_question(q: &str) -> String {
    q.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}
