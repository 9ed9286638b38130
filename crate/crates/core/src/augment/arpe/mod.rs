//! Answer-guided reverse path exploration.
//!
//! Training forms are clustered by skeleton. For each of the most frequent
//! skeletons, the graph is walked backwards from every known answer along
//! the skeleton's edges; each complete walk fills the skeleton's relation
//! and key-entity slots, is checked by execution, and is turned into a
//! question by the model.

mod explore;
mod filter;
mod run;

use std::collections::BTreeMap;

use serde::Serialize;

use super::QALPair;
use crate::kg::{KnowledgeGraph, Term};
use crate::lf::{skeleton, slot_at_mut, to_sparql, SExpr, Skeleton};
use crate::sparql::{InMemoryEngine, SparqlBackend, DEFAULT_BASE_IRI};

pub use explore::{explore_paths, explore_paths_with, ExploreConfig, ExploredPath, PathStep, DEFAULT_FAN_OUT};
pub use filter::{filter_question, reject_reason, Rejection};
pub use run::{generate_question, path_text, run_arpe, ArpeConfig, ArpeOutput, ArpeReport, PatternReport};

/// How an edge of the form relates the node nearer the answer (parent) to
/// the node further from it (child).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Triple `(child, r, parent)`, written `(JOIN (R r) child)`.
    Forward,
    /// Triple `(parent, r, child)`, written `(JOIN r child)`.
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeRole {
    /// The child is a key entity, a leaf of the form.
    KeyEntityEdge,
    /// The child is an unnamed intermediate node.
    IntermediateEdge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgePlan {
    /// Location of the relation leaf in the form.
    pub relation_path: Vec<usize>,
    pub direction: Direction,
    pub role: EdgeRole,
    pub parent: usize,
    pub child: usize,
}

/// Node 0 is always the answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternNode {
    /// Location of the key-entity leaf, `None` for the answer and intermediates.
    pub key_path: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReasoningPattern {
    pub skeleton: Skeleton,
    #[serde(skip)]
    pub template: SExpr,
    pub nodes: Vec<PatternNode>,
    /// Edges in pre-order; every edge's parent is bound by an earlier edge or is the answer.
    pub edges: Vec<EdgePlan>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("pattern uses an aggregate operator")]
    Aggregate,
    #[error("pattern has an entity or literal outside a JOIN argument")]
    BareLeaf,
    #[error("pattern is ill-typed")]
    IllTyped,
}

pub const ANSWER_NODE: usize = 0;

impl ReasoningPattern {
    pub fn from_skeleton(skeleton: &Skeleton) -> Result<Self, PatternError> {
        let template = skeleton.template();
        let mut p = ReasoningPattern {
            skeleton: skeleton.clone(),
            template: template.clone(),
            nodes: vec![PatternNode { key_path: None }],
            edges: Vec::new(),
        };
        p.plan(&template, &mut Vec::new(), ANSWER_NODE)?;
        Ok(p)
    }

    fn plan(&mut self, f: &SExpr, path: &mut Vec<usize>, node: usize) -> Result<(), PatternError> {
        match f {
            SExpr::Join(rel, arg) => {
                let mut relation_path = path.clone();
                relation_path.push(0);
                let mut reversed = false;
                let mut r = rel.as_ref();
                while let SExpr::Reverse(inner) = r {
                    reversed = !reversed;
                    relation_path.push(0);
                    r = inner;
                }
                if !matches!(r, SExpr::Relation(_)) {
                    return Err(PatternError::IllTyped);
                }
                let child = self.nodes.len();
                path.push(1);
                let leaf = matches!(arg.as_ref(), SExpr::Entity(_) | SExpr::Literal { .. });
                self.nodes.push(PatternNode {
                    key_path: leaf.then(|| path.clone()),
                });
                self.edges.push(EdgePlan {
                    relation_path,
                    direction: if reversed { Direction::Forward } else { Direction::Reverse },
                    role: if leaf { EdgeRole::KeyEntityEdge } else { EdgeRole::IntermediateEdge },
                    parent: node,
                    child,
                });
                let res = if leaf { Ok(()) } else { self.plan(arg, path, child) };
                path.pop();
                res
            }
            SExpr::And(a, b) => {
                for (i, c) in [a, b].into_iter().enumerate() {
                    path.push(i);
                    let res = self.plan(c, path, node);
                    path.pop();
                    res?;
                }
                Ok(())
            }
            SExpr::Entity(_) | SExpr::Literal { .. } => Err(PatternError::BareLeaf),
            SExpr::Count(_) | SExpr::Argmax(..) | SExpr::Argmin(..) | SExpr::Compare(..) => Err(PatternError::Aggregate),
            SExpr::Relation(_) | SExpr::Reverse(_) => Err(PatternError::IllTyped),
        }
    }

    pub fn key_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.key_path.is_some())
            .map(|(i, _)| i)
    }
}

/// Skeletons with the indices of their members, most frequent first, ties
/// broken by skeleton text.
pub fn rank_skeletons(training: &[QALPair]) -> Vec<(Skeleton, Vec<usize>)> {
    let mut groups: BTreeMap<Skeleton, Vec<usize>> = BTreeMap::new();
    for (i, p) in training.iter().enumerate() {
        groups.entry(skeleton(&p.logical_form)).or_default().push(i);
    }
    let mut ranked: Vec<_> = groups.into_iter().collect();
    ranked.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));
    ranked
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternCluster {
    pub rank: usize,
    pub skeleton: Skeleton,
    pub members: Vec<usize>,
    /// Answer ids of all members, deduplicated in first-seen order.
    pub answers: Vec<String>,
}

/// The top `r` clusters of `training` by skeleton.
pub fn group_by_pattern(training: &[QALPair], r: usize) -> Vec<PatternCluster> {
    rank_skeletons(training)
        .into_iter()
        .take(r)
        .enumerate()
        .map(|(rank, (skeleton, members))| {
            let mut answers: Vec<String> = Vec::new();
            for &m in &members {
                for a in &training[m].answers {
                    if !answers.contains(a) {
                        answers.push(a.clone());
                    }
                }
            }
            PatternCluster {
                rank,
                skeleton,
                members,
                answers,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("path has {found} steps, pattern has {expected} edges")]
    Arity { expected: usize, found: usize },
    #[error("slot path {0:?} not found in the template")]
    MissingSlot(Vec<usize>),
    #[error("key node {0} is unbound")]
    Unbound(usize),
}

/// Fills the pattern's relation and key-entity slots from `path`.
pub fn build_logical_form(path: &ExploredPath, pattern: &ReasoningPattern) -> Result<SExpr, BuildError> {
    if path.steps.len() != pattern.edges.len() {
        return Err(BuildError::Arity {
            expected: pattern.edges.len(),
            found: path.steps.len(),
        });
    }
    let mut f = pattern.template.clone();
    for (edge, step) in pattern.edges.iter().zip(&path.steps) {
        let slot = slot_at_mut(&mut f, &edge.relation_path).ok_or_else(|| BuildError::MissingSlot(edge.relation_path.clone()))?;
        *slot = SExpr::relation(&step.relation);
    }
    for node in pattern.key_nodes() {
        let key_path = pattern.nodes[node].key_path.as_ref().expect("key node");
        let term = path.nodes.get(node).ok_or(BuildError::Unbound(node))?;
        let slot = slot_at_mut(&mut f, key_path).ok_or_else(|| BuildError::MissingSlot(key_path.clone()))?;
        *slot = match term {
            Term::Entity(id) => SExpr::entity(id),
            Term::Literal(v) => SExpr::literal(v),
        };
    }
    Ok(f)
}

/// True iff `answer` is among the results of executing the compiled form.
pub fn validate(f: &SExpr, answer: &Term, kg: &KnowledgeGraph) -> bool {
    let Ok(query) = to_sparql(f, DEFAULT_BASE_IRI) else {
        return false;
    };
    InMemoryEngine::new(kg, DEFAULT_BASE_IRI)
        .select(&query)
        .is_ok_and(|answers| answers.contains(answer))
}
