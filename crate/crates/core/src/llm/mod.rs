//! Prompt templates and text-generation backends.

mod list;
mod mock;
mod openai;

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::http::HttpError;

pub use list::{list_items, parse_numbered_list, ParsedList};
pub(crate) use mock::humanize_relation;
pub use mock::MockLlm;
pub use openai::{OpenAiClient, OpenAiConfig, API_KEY_ENV};

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap());

/// A named prompt with `{name}` placeholders. `{{` and `}}` produce literal braces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("template {template:?} has no binding for placeholder {{{placeholder}}}")]
    MissingBinding { template: String, placeholder: String },
}

pub type Bindings = BTreeMap<String, String>;

impl PromptTemplate {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for piece in split(&self.text) {
            if let Piece::Hole(name) = piece {
                if !out.iter().any(|n| n == name) {
                    out.push(name.to_owned());
                }
            }
        }
        out
    }

    pub fn render(&self, bindings: &Bindings) -> Result<String, RenderError> {
        let mut out = String::with_capacity(self.text.len());
        for piece in split(&self.text) {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Hole(name) => match bindings.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        return Err(RenderError::MissingBinding {
                            template: self.name.clone(),
                            placeholder: name.to_owned(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }
}

enum Piece<'a> {
    Text(&'a str),
    Hole(&'a str),
}

fn split(text: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let next = rest.find(['{', '}']).unwrap_or(rest.len());
        if next > 0 {
            out.push(Piece::Text(&rest[..next]));
            rest = &rest[next..];
            continue;
        }
        if rest.starts_with("{{") {
            out.push(Piece::Text("{"));
            rest = &rest[2..];
        } else if rest.starts_with("}}") {
            out.push(Piece::Text("}"));
            rest = &rest[2..];
        } else if let Some(m) = PLACEHOLDER.find(rest).filter(|m| m.start() == 0) {
            out.push(Piece::Hole(&rest[1..m.end() - 1]));
            rest = &rest[m.end()..];
        } else {
            out.push(Piece::Text(&rest[..1]));
            rest = &rest[1..];
        }
    }
    out
}

/// Renders `template` with `bindings`, free function form.
pub fn render(template: &PromptTemplate, bindings: &Bindings) -> Result<String, RenderError> {
    template.render(bindings)
}

/// Built-in templates, one per generation task. All are overridable from config.
pub mod templates {
    use super::PromptTemplate;

    pub const SPQG: &str = "spqg";
    pub const SPQR: &str = "spqr";
    pub const ARPE: &str = "arpe";
    pub const PARSE: &str = "parse";

    pub fn spqg() -> PromptTemplate {
        PromptTemplate::new(
            SPQG,
            "You write natural questions for a knowledge graph relation.\n\
             Relation: {relation}\n\
             Example fact (subject, relation, object): {triple}\n\
             Write {k} different questions that ask for the object of this relation. \
             Use the exact token [SUBJECT] where the subject goes, once per question. \
             Do not copy the relation identifier. Return a numbered list, one question per line.",
        )
    }

    pub fn spqr() -> PromptTemplate {
        PromptTemplate::new(
            SPQR,
            "Rephrase the question below in {rw} different ways. Keep its meaning, change the wording \
             and sentence structure, and use synonyms where natural.\n\
             Question: {question}\n\
             Return a numbered list, one rephrasing per line.",
        )
    }

    pub fn arpe() -> PromptTemplate {
        PromptTemplate::new(
            ARPE,
            "Below is a reasoning path in a knowledge graph that ends at a hidden answer.\n\
             Path: {path}\n\
             Write one natural question whose answer is the hidden entity at the end of the path. \
             Mention the named entities, never use placeholders such as [Entity], never write \
             relation identifiers, and do not reveal the answer.",
        )
    }

    pub fn parse() -> PromptTemplate {
        PromptTemplate::new(
            PARSE,
            "{instruction}\n\n{examples}\nQuestion: {question}\n\
             Give {beam} candidate logical forms, most likely first, one per line.",
        )
    }

    pub fn by_name(name: &str) -> Option<PromptTemplate> {
        match name {
            SPQG => Some(spqg()),
            SPQR => Some(spqr()),
            ARPE => Some(arpe()),
            PARSE => Some(parse()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    /// Name of the template the prompt came from; backends may key on it.
    pub template: String,
    pub prompt: String,
    /// Values the prompt was rendered from.
    pub bindings: Bindings,
    /// Blank means the backend's default model.
    pub model: String,
    /// `None` means the backend's configured temperature.
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
}

impl GenerationRequest {
    pub fn from_template(template: &PromptTemplate, bindings: Bindings) -> Result<Self, RenderError> {
        Ok(Self {
            template: template.name.clone(),
            prompt: template.render(&bindings)?,
            bindings,
            model: String::new(),
            temperature: None,
            max_tokens: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub finish_reason: Option<String>,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("environment variable {0} is not set")]
    MissingApiKey(&'static str),
    #[error("backend returned empty text")]
    EmptyResponse,
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("mock backend has no response for prompt digest {0}")]
    NoCannedResponse(String),
    #[error("unparseable-llm-output")]
    Unparseable,
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Http(e) if e.is_retryable())
    }
}

/// A text-generation service.
pub trait LlmBackend: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, LlmError>;

    /// Model name used when a request leaves it blank.
    fn default_model(&self) -> &str {
        ""
    }
}

/// Sends `req` to `backend`. Success always carries non-empty text.
pub fn complete(req: &GenerationRequest, backend: &dyn LlmBackend) -> Result<GenerationResponse, LlmError> {
    let resp = backend.generate(req)?;
    if resp.text.trim().is_empty() {
        return Err(LlmError::EmptyResponse);
    }
    Ok(resp)
}

/// Renders and sends in one step.
pub fn ask(template: &PromptTemplate, bindings: Bindings, backend: &dyn LlmBackend) -> Result<String, LlmError> {
    let req = GenerationRequest::from_template(template, bindings)?;
    complete(&req, backend).map(|r| r.text)
}
