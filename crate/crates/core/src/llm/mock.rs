//! Offline backend for tests and reproducible runs.
//!
//! Lookup order: responses registered in memory, then a file named by the
//! SHA-256 hex digest of the prompt (with or without `.txt`) in the canned
//! directory, then a rule-based reply synthesised from the request bindings
//! for the built-in augmentation templates.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{templates, Bindings, GenerationRequest, GenerationResponse, LlmBackend, LlmError};
use crate::hash::sha256_hex;

#[derive(Debug, Default)]
pub struct MockLlm {
    canned: HashMap<String, String>,
    dir: Option<PathBuf>,
    rules: bool,
    calls: AtomicUsize,
}

impl MockLlm {
    /// Rule-based replies only.
    pub fn new() -> Self {
        Self {
            rules: true,
            ..Self::default()
        }
    }

    /// Canned replies from `dir`, falling back to rules.
    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            rules: true,
            ..Self::default()
        }
    }

    /// Disables the rule-based fallback so unknown prompts fail.
    pub fn strict(mut self) -> Self {
        self.rules = false;
        self
    }

    pub fn respond(mut self, prompt: &str, text: impl Into<String>) -> Self {
        self.canned.insert(sha256_hex(prompt), text.into());
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn canned(&self, digest: &str) -> Option<String> {
        let dir = self.dir.as_ref()?;
        [dir.join(digest), dir.join(format!("{digest}.txt"))]
            .into_iter()
            .find_map(|p| fs::read_to_string(p).ok())
    }
}

impl LlmBackend for MockLlm {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let digest = sha256_hex(&req.prompt);
        let text = self
            .canned
            .get(&digest)
            .cloned()
            .or_else(|| self.canned(&digest))
            .or_else(|| self.rules.then(|| rule_reply(&req.template, &req.bindings)).flatten())
            .ok_or(LlmError::NoCannedResponse(digest))?;
        Ok(GenerationResponse {
            text,
            finish_reason: Some("stop".into()),
            retries: 0,
        })
    }

    fn default_model(&self) -> &str {
        "mock"
    }
}

/// Words of the last dotted segment: `people.person.place_of_birth` → `place of birth`.
pub(crate) fn humanize_relation(relation: &str) -> String {
    let last = relation.rsplit('.').next().unwrap_or(relation);
    let words = last.replace('_', " ").trim().to_owned();
    if words.is_empty() || words == relation {
        "related entity".to_owned()
    } else {
        words
    }
}

fn count(bindings: &Bindings, key: &str) -> usize {
    bindings.get(key).and_then(|v| v.parse().ok()).unwrap_or(1)
}

fn rule_reply(template: &str, b: &Bindings) -> Option<String> {
    let lines: Vec<String> = match template {
        templates::SPQG => {
            let w = humanize_relation(b.get("relation")?);
            const FORMS: [&str; 6] = [
                "What is the {w} of [SUBJECT]?",
                "Which {w} does [SUBJECT] have?",
                "Can you tell me the {w} of [SUBJECT]?",
                "Tell me the {w} for [SUBJECT].",
                "What {w} is associated with [SUBJECT]?",
                "Do you know the {w} of [SUBJECT]?",
            ];
            (0..count(b, "k"))
                .map(|i| {
                    let base = FORMS[i % FORMS.len()].replace("{w}", &w);
                    match i / FORMS.len() {
                        0 => base,
                        round => format!("{base} (variant {})", round + 1),
                    }
                })
                .collect()
        }
        templates::SPQR => {
            let q = b.get("question")?.trim().trim_end_matches('?').trim();
            const FORMS: [&str; 5] = [
                "Could you tell me {q}?",
                "I would like to know {q}.",
                "Please answer this: {q}?",
                "Here is my question, {q}?",
                "Do you happen to know {q}?",
            ];
            (0..count(b, "rw"))
                .map(|i| {
                    let base = FORMS[i % FORMS.len()].replace("{q}", q);
                    match i / FORMS.len() {
                        0 => base,
                        round => format!("{base} (take {})", round + 1),
                    }
                })
                .collect()
        }
        templates::ARPE => {
            let entities = b.get("entities")?;
            let relations = b.get("relation_words")?;
            vec![format!("Which entity is connected to {entities} by way of {relations}?")]
        }
        _ => return None,
    };
    Some(
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{}. {l}", i + 1))
            .collect::<Vec<_>>()
            .join("\n"),
    )
}
