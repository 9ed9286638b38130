use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::http::{self, HttpError, RetryPolicy};
use crate::Score;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    /// Inputs per request when embedding the corpus.
    pub batch: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "text-embedding".into(),
            timeout_secs: 60,
            max_retries: 3,
            initial_backoff_ms: 500,
            batch: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
}

/// Client for `POST {base_url}/embeddings`.
pub struct EmbeddingClient {
    config: EmbeddingConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

impl EmbeddingClient {
    pub fn new(config: EmbeddingConfig, api_key: Option<String>) -> Self {
        let agent = http::agent(Duration::from_secs(config.timeout_secs));
        Self { config, api_key, agent }
    }

    fn post(&self, inputs: &[String]) -> Result<String, HttpError> {
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let mut call = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let resp = call.send_json(json!({"model": self.config.model, "input": inputs}))?;
        http::read_body(resp)
    }

    /// One vector per input, in input order.
    pub fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let policy = RetryPolicy {
            max_retries: self.config.max_retries,
            initial_backoff: Duration::from_millis(self.config.initial_backoff_ms),
            ..RetryPolicy::default()
        };
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(self.config.batch.max(1)) {
            let (body, _) = policy.run(|| self.post(chunk), HttpError::is_retryable);
            let mut parsed: EmbeddingResponse =
                serde_json::from_str(&body?).map_err(|e| EmbeddingError::Malformed(e.to_string()))?;
            if parsed.data.len() != chunk.len() {
                return Err(EmbeddingError::Malformed(format!(
                    "{} vectors for {} inputs",
                    parsed.data.len(),
                    chunk.len()
                )));
            }
            parsed.data.sort_by_key(|d| d.index);
            out.extend(parsed.data.into_iter().map(|d| d.embedding));
        }
        Ok(out)
    }
}

/// Corpus vectors computed once; queries are embedded on demand.
pub struct EmbeddingIndex<S> {
    client: EmbeddingClient,
    ids: Vec<String>,
    vectors: Vec<Vec<S>>,
}

fn cosine<S: Score>(a: &[S], b: &[S]) -> S {
    let dot = a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + *x * *y);
    let na = a.iter().fold(S::zero(), |acc, x| acc + *x * *x).sqrt();
    let nb = b.iter().fold(S::zero(), |acc, x| acc + *x * *x).sqrt();
    if na == S::zero() || nb == S::zero() {
        S::zero()
    } else {
        dot / (na * nb)
    }
}

impl<S: Score> EmbeddingIndex<S> {
    pub fn build(client: EmbeddingClient, corpus: Vec<(String, String)>) -> Result<Self, EmbeddingError> {
        let (ids, labels): (Vec<String>, Vec<String>) = corpus.into_iter().unzip();
        let vectors = client
            .embed(&labels)?
            .into_iter()
            .map(|v| v.into_iter().map(S::of).collect())
            .collect();
        Ok(Self { client, ids, vectors })
    }

    /// Cosine similarity clamped to [0, 1]. A failed query embedding yields
    /// no scores, which leaves the slot unrefined.
    pub(crate) fn scores(&self, query: &str) -> HashMap<String, S> {
        let q: Vec<S> = match self.client.embed(&[query.to_owned()]) {
            Ok(mut v) => v.swap_remove(0).into_iter().map(S::of).collect(),
            Err(e) => {
                tracing::warn!(query, error = %e, "embedding query failed");
                return HashMap::new();
            }
        };
        let mut best: HashMap<String, S> = HashMap::new();
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            let s = cosine(&q, v).max(S::zero()).min(S::one());
            let e = best.entry(id.clone()).or_insert(s);
            if s > *e {
                *e = s;
            }
        }
        best
    }
}
