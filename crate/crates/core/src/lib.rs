//! Knowledge-graph question answering through logical-form generation,
//! synthetic data augmentation and retrieval-based refinement.
//!
//! The crate is organised around a few layers:
//!
//! * [`kg`] holds the triple store and a remote SPARQL endpoint client.
//! * [`lf`] parses, prints, compiles and interprets S-expression logical forms.
//! * [`sparql`] executes compiled queries in memory or remotely.
//! * [`llm`] renders prompts and talks to generation backends.
//! * [`augment`] builds synthetic question / logical-form pairs.
//! * [`candidates`], [`refine`] and [`eval`] cover parsing, grounding and scoring.
//!
//! Numeric code that produces scores is generic over [`Score`]; the aliases
//! below fix it to `f64`.

pub mod augment;
pub mod candidates;
pub mod eval;
pub mod jsonl;
pub mod kg;
pub mod lf;
pub mod llm;
pub mod parallel;
pub mod refine;
pub mod sparql;
pub mod value;

mod hash;
mod http;
mod score;
#[cfg(test)]
mod testutil;

pub use hash::{sha256_hex, stable_u64};
pub use http::{HttpError, RetryPolicy};
pub use score::Score;

/// Candidate list with `f64` scores.
pub type Candidates = candidates::CandidateList<f64>;
/// Similarity index with `f64` scores.
pub type Similarity = refine::SimilarityIndex<f64>;
pub type RefineIndices = refine::Indices<f64>;
pub type Metrics = eval::MetricsReport<f64>;
pub type ItemScores = eval::ItemMetrics<f64>;
