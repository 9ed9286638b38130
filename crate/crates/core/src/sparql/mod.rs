//! SPARQL queries and the backends that execute them.
//!
//! The in-memory engine understands the SELECT subset produced by
//! [`crate::lf::to_sparql`]: basic graph patterns, nested groups and
//! sub-selects, `VALUES`, numeric `FILTER` comparisons, `COUNT(DISTINCT ..)`
//! projections, `ORDER BY` and `LIMIT`.
//!
//! One dialect rule differs from a general SPARQL processor: an explicit
//! `ASC(?v)` / `DESC(?v)` order key sorts numerically and drops rows whose
//! value is not a number or ISO date. A bare `?v` key sorts by term order.

mod engine;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::http::HttpError;
use crate::kg::{AnswerSet, KnowledgeGraph};

pub use engine::InMemoryEngine;

pub const DEFAULT_BASE_IRI: &str = "http://rdf.freebase.com/ns/";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparqlQuery {
    pub text: String,
    /// Projected variable name, without the leading `?`.
    pub variable: String,
}

impl fmt::Display for SparqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SparqlError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("malformed results: {0}")]
    Results(String),
}

impl SparqlError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, SparqlError::Http(e) if e.is_retryable())
    }
}

/// Anything that can answer a SELECT query with a single projected variable.
pub trait SparqlBackend: Send + Sync {
    fn select(&self, query: &SparqlQuery) -> Result<AnswerSet, SparqlError>;
}

/// Runs `query` on `backend`.
pub fn execute_sparql(query: &SparqlQuery, backend: &dyn SparqlBackend) -> Result<AnswerSet, SparqlError> {
    backend.select(query)
}

impl<'a> SparqlBackend for InMemoryEngine<'a> {
    fn select(&self, query: &SparqlQuery) -> Result<AnswerSet, SparqlError> {
        self.run(query)
    }
}

/// Convenience constructor for the in-memory backend.
pub fn in_memory<'a>(kg: &'a KnowledgeGraph, base_iri: &str) -> InMemoryEngine<'a> {
    InMemoryEngine::new(kg, base_iri)
}

fn needs_escape(c: char) -> bool {
    c.is_whitespace() || c.is_control() || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\' | '%')
}

/// Percent-encodes the characters that may not appear inside `<...>`.
pub fn encode_iri_part(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if needs_escape(c) {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                out.push_str(&format!("%{b:02X}"));
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub fn decode_iri_part(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            let hex = |b: u8| (b as char).to_digit(16);
            if let (Some(hi), Some(lo)) = (hex(bytes[i + 1]), hex(bytes[i + 2])) {
                out.push((hi * 16 + lo) as u8);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Renders a literal in SPARQL syntax.
pub fn literal_syntax(value: &str, datatype: Option<&str>) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    if let Some(dt) = datatype {
        out.push_str("^^<");
        out.push_str(&encode_iri_part(dt));
        out.push('>');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iri_escaping_round_trips() {
        for s in ["m.01x", "Barack Obama", "a%b", "x>y", "名前 1"] {
            let enc = encode_iri_part(s);
            assert!(!enc.contains(' ') && !enc.contains('>'));
            assert_eq!(decode_iri_part(&enc), s);
        }
    }

    #[test]
    fn literal_rendering() {
        assert_eq!(literal_syntax("a\"b", None), "\"a\\\"b\"");
        assert_eq!(
            literal_syntax("1990", Some("http://www.w3.org/2001/XMLSchema#gYear")),
            "\"1990\"^^<http://www.w3.org/2001/XMLSchema#gYear>"
        );
    }
}
