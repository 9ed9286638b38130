use std::time::Duration;

use serde_json::Value;

use super::{AnswerSet, Term};
use crate::http::{self, HttpError, RetryPolicy};
use crate::sparql::{decode_iri_part, SparqlBackend, SparqlError, SparqlQuery, DEFAULT_BASE_IRI};

#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub url: String,
    /// Prefix stripped from result IRIs to recover ids.
    pub base_iri: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            base_iri: DEFAULT_BASE_IRI.to_owned(),
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
        }
    }
}

/// A SPARQL 1.1 protocol endpoint queried with form-encoded POSTs.
pub struct RemoteEndpoint {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl RemoteEndpoint {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = http::agent(config.timeout);
        Self { config, agent }
    }

    fn post(&self, query: &str) -> Result<String, HttpError> {
        let resp = self
            .agent
            .post(&self.config.url)
            .header("Accept", "application/sparql-results+json")
            .send_form([("query", query)])?;
        http::read_body(resp)
    }
}

impl SparqlBackend for RemoteEndpoint {
    fn select(&self, query: &SparqlQuery) -> Result<AnswerSet, SparqlError> {
        let (body, retries) = self.config.retry.run(|| self.post(&query.text), HttpError::is_retryable);
        if retries > 0 {
            tracing::debug!(retries, url = %self.config.url, "endpoint retried");
        }
        parse_results(&body?, &query.variable, &self.config.base_iri)
    }
}

/// Extracts the bindings of `var` from a `application/sparql-results+json` document.
pub(crate) fn parse_results(body: &str, var: &str, base_iri: &str) -> Result<AnswerSet, SparqlError> {
    let doc: Value = serde_json::from_str(body).map_err(|e| SparqlError::Results(e.to_string()))?;
    let bindings = doc
        .pointer("/results/bindings")
        .and_then(Value::as_array)
        .ok_or_else(|| SparqlError::Results("missing results.bindings".into()))?;
    let mut out = AnswerSet::new();
    for b in bindings {
        let Some(cell) = b.get(var) else { continue };
        let value = cell
            .get("value")
            .and_then(Value::as_str)
            .ok_or_else(|| SparqlError::Results(format!("binding for {var} has no value")))?;
        let term = match cell.get("type").and_then(Value::as_str) {
            Some("uri") => Term::Entity(decode_iri_part(value.strip_prefix(base_iri).unwrap_or(value))),
            Some("literal" | "typed-literal") => Term::Literal(value.to_owned()),
            Some("bnode") => Term::Entity(format!("_:{value}")),
            other => return Err(SparqlError::Results(format!("unknown term type {other:?}"))),
        };
        out.insert(term);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_document() {
        let body = r#"{"head":{"vars":["x0"]},"results":{"bindings":[
            {"x0":{"type":"uri","value":"http://rdf.freebase.com/ns/m.01"}},
            {"x0":{"type":"literal","value":"1961","datatype":"http://www.w3.org/2001/XMLSchema#gYear"}},
            {"y":{"type":"literal","value":"ignored"}}
        ]}}"#;
        let got = parse_results(body, "x0", DEFAULT_BASE_IRI).unwrap();
        assert_eq!(got.values(), vec!["m.01", "1961"]);
        assert!(got.iter().next().is_some_and(|t| !t.is_literal()));
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(parse_results("nope", "x", ""), Err(SparqlError::Results(_))));
        assert!(matches!(parse_results("{}", "x", ""), Err(SparqlError::Results(_))));
    }

    #[test]
    fn unreachable_endpoint_is_a_network_error() {
        let mut cfg = EndpointConfig::new("http://127.0.0.1:9/sparql");
        cfg.timeout = Duration::from_secs(2);
        cfg.retry.max_retries = 0;
        let ep = RemoteEndpoint::new(cfg);
        let q = SparqlQuery {
            text: "SELECT ?x0 WHERE { }".into(),
            variable: "x0".into(),
        };
        let err = ep.select(&q).unwrap_err();
        assert!(err.is_retryable(), "{err:?}");
    }
}
