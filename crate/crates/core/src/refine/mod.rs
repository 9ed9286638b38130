//! Retrieval-based grounding of candidate forms and execution until one
//! returns answers.
//!
//! Entity slots are refined first; relation slots are refined only when no
//! entity-refined form produced an answer.

mod combos;
mod embedding;
mod index;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::candidates::{CandidateForm, CandidateList};
use crate::kg::AnswerSet;
use crate::lf::{slots, substitute, to_sparql, SExpr, SlotKind};
use crate::sparql::{execute_sparql, SparqlBackend, DEFAULT_BASE_IRI};
use crate::Score;

pub use combos::{refine_entities, refine_relations};
pub use embedding::{EmbeddingClient, EmbeddingConfig, EmbeddingError, EmbeddingIndex};
pub use index::{retrieve_similar, trigram_jaccard, trigrams, AliasError, AliasTable, SimilarityBackend, SimilarityIndex, TrigramIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// An original candidate answered unchanged.
    Direct,
    EntityRefined,
    RelationRefined,
    Failed,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Direct => "direct",
            Stage::EntityRefined => "entity-refined",
            Stage::RelationRefined => "relation-refined",
            Stage::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Entity,
    Relation,
}

/// One executed form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Execution {
    pub phase: Phase,
    pub form: String,
    pub answers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementResult {
    pub answers: AnswerSet,
    pub form: Option<SExpr>,
    pub sparql: Option<String>,
    pub stage: Stage,
    pub executed: usize,
    /// Forms that failed to compile or execute and were skipped.
    pub errors: usize,
    pub trace: Vec<Execution>,
}

impl RefinementResult {
    pub fn failed() -> Self {
        Self {
            answers: AnswerSet::new(),
            form: None,
            sparql: None,
            stage: Stage::Failed,
            executed: 0,
            errors: 0,
            trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub k: usize,
    pub combo_cap: usize,
    pub base_iri: String,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            k: 5,
            combo_cap: 32,
            base_iri: DEFAULT_BASE_IRI.to_owned(),
        }
    }
}

pub struct Indices<S = f64> {
    pub entities: SimilarityIndex<S>,
    pub relations: SimilarityIndex<S>,
}

struct Executor<'a> {
    backend: &'a dyn SparqlBackend,
    base_iri: &'a str,
    done: HashSet<String>,
    result: RefinementResult,
}

impl Executor<'_> {
    /// Runs `f` unless an identical form already ran. True on a non-empty answer.
    fn run(&mut self, phase: Phase, f: &SExpr) -> bool {
        let text = f.to_string();
        if !self.done.insert(text.clone()) {
            return false;
        }
        let outcome = to_sparql(f, self.base_iri)
            .map_err(|e| e.to_string())
            .and_then(|q| execute_sparql(&q, self.backend).map(|a| (q, a)).map_err(|e| e.to_string()));
        match outcome {
            Ok((q, answers)) => {
                self.result.executed += 1;
                self.result.trace.push(Execution {
                    phase,
                    form: text,
                    answers: answers.len(),
                    error: None,
                });
                if answers.is_empty() {
                    return false;
                }
                self.result.answers = answers;
                self.result.form = Some(f.clone());
                self.result.sparql = Some(q.text);
                true
            }
            Err(e) => {
                tracing::debug!(form = %text, error = %e, "skipping form");
                self.result.errors += 1;
                self.result.trace.push(Execution {
                    phase,
                    form: text,
                    answers: 0,
                    error: Some(e),
                });
                false
            }
        }
    }
}

/// Executes entity-refined candidates in order and returns the first
/// non-empty answer; if there is none, does the same over the
/// relation-refined versions of those forms.
pub fn answer<S: Score>(
    c: &CandidateList<S>,
    backend: &dyn SparqlBackend,
    config: &RefineConfig,
    indices: &Indices<S>,
) -> RefinementResult {
    let originals: HashSet<String> = c.parsed().map(|(_, f)| f.to_string()).collect();
    let mut ex = Executor {
        backend,
        base_iri: &config.base_iri,
        done: HashSet::new(),
        result: RefinementResult::failed(),
    };

    let refined = refine_entities(c, config.k, config.combo_cap, &indices.entities);
    for (_, f) in refined.parsed() {
        if ex.run(Phase::Entity, f) {
            ex.result.stage = if originals.contains(&f.to_string()) {
                Stage::Direct
            } else {
                Stage::EntityRefined
            };
            return ex.result;
        }
    }

    let relations = refine_relations(&refined, config.k, config.combo_cap, &indices.relations);
    for (_, f) in relations.parsed() {
        if ex.run(Phase::Relation, f) {
            ex.result.stage = Stage::RelationRefined;
            return ex.result;
        }
    }
    ex.result
}

/// Oracle entity linking: replaces the entity slots of every candidate with
/// the gold form's entities, position by position, when the counts agree.
pub fn with_gold_entities<S: Score>(c: &CandidateList<S>, gold: &SExpr) -> CandidateList<S> {
    let gold_entities: Vec<&str> = gold.entities();
    let mut out = c.clone();
    for entry in &mut out.entries {
        let CandidateForm::Parsed(f) = &entry.form else {
            continue;
        };
        let targets: Vec<_> = slots(f).into_iter().filter(|s| s.kind == SlotKind::Entity).collect();
        if targets.len() != gold_entities.len() {
            continue;
        }
        let replaced = targets.iter().zip(&gold_entities).fold(f.clone(), |acc, (slot, id)| {
            substitute(&acc, slot, SExpr::entity(*id)).expect("entity slot of this form")
        });
        entry.form = CandidateForm::Parsed(replaced);
    }
    out
}
