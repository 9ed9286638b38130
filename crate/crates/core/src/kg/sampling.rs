//! Seeded sampling over relation extents.
//!
//! Each (purpose, relation) pair draws from its own ChaCha stream keyed by
//! the caller's seed, so results do not depend on the order relations are
//! visited in.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{KgError, KnowledgeGraph, Triple};
use crate::hash::stable_u64;

/// A triple with display labels for both ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub subject_label: String,
    pub object_label: String,
}

pub(crate) fn substream(seed: u64, purpose: &str, key: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stable_u64(&[purpose, key]));
    rng
}

impl KnowledgeGraph {
    /// Up to `k` distinct head entities of `relation`, with labels.
    pub fn sample_subjects(&self, relation: &str, k: usize, seed: u64) -> Vec<(String, String)> {
        let heads: BTreeSet<&str> = self
            .relation_triples(relation)
            .map(|t| t.subject.as_str())
            .collect();
        let heads: Vec<&str> = heads.into_iter().collect();
        let mut rng = substream(seed, "subjects", relation);
        heads
            .choose_multiple(&mut rng, k)
            .map(|&id| (id.to_owned(), self.label_or_id(id).to_owned()))
            .collect()
    }

    /// One triple of `relation` with labels resolved.
    pub fn sample_triple(&self, relation: &str, seed: u64) -> Result<LabeledTriple, KgError> {
        let all: Vec<&Triple> = self.relation_triples(relation).collect();
        let mut rng = substream(seed, "triple", relation);
        let t = all
            .choose(&mut rng)
            .ok_or_else(|| KgError::NoTripleForRelation(relation.to_owned()))?;
        Ok(LabeledTriple {
            triple: (*t).clone(),
            subject_label: self.label_or_id(&t.subject).to_owned(),
            object_label: self.display_term(&t.object).to_owned(),
        })
    }
}
