//! In-memory triple store.
//!
//! The store is built once from a triple file (and an optional label file)
//! and never mutated afterwards. Forward and reverse adjacency are kept as
//! nested maps so that lookups take borrowed `&str` keys; unknown ids simply
//! resolve to empty sets.

mod endpoint;
mod load;
mod sampling;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

pub use endpoint::{EndpointConfig, RemoteEndpoint};
pub use load::{load_kg, load_labels, parse_triples};
pub use sampling::LabeledTriple;
pub(crate) use sampling::substream;

/// An object position value: either an entity id or a literal's lexical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Term {
    Entity(String),
    Literal(String),
}

impl Term {
    pub fn entity(id: impl Into<String>) -> Self {
        Term::Entity(id.into())
    }

    pub fn literal(value: impl Into<String>) -> Self {
        Term::Literal(value.into())
    }

    pub fn as_str(&self) -> &str {
        match self {
            Term::Entity(s) | Term::Literal(s) => s,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: Term) -> Self {
        Self {
            subject: subject.into(),
            relation: relation.into(),
            object,
        }
    }
}

/// A set of answers with a stable iteration order.
///
/// Equality is set equality; the order only matters for "first answer"
/// style metrics and is whatever the producing backend returned.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerSet(IndexSet<Term>);

impl AnswerSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: Term) -> bool {
        self.0.insert(term)
    }

    pub fn contains(&self, term: &Term) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Term> + '_ {
        self.0.iter()
    }

    pub fn first(&self) -> Option<&Term> {
        self.0.first()
    }

    /// Reorders the members by term ordering.
    pub fn sorted(mut self) -> Self {
        self.0.sort();
        self
    }

    /// Lexical values, in iteration order.
    pub fn values(&self) -> Vec<String> {
        self.0.iter().map(|t| t.as_str().to_owned()).collect()
    }
}

impl FromIterator<Term> for AnswerSet {
    fn from_iter<I: IntoIterator<Item = Term>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl IntoIterator for AnswerSet {
    type Item = Term;
    type IntoIter = indexmap::set::IntoIter<Term>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: conflicting label for {id}: {first:?} vs {second:?}")]
    ConflictingLabel {
        line: usize,
        id: String,
        first: String,
        second: String,
    },
    #[error("no-triple-for-relation: {0}")]
    NoTripleForRelation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KgStats {
    pub triples: usize,
    pub entities: usize,
    pub relations: usize,
    pub literals: usize,
    pub labels: usize,
}

#[derive(Debug, Default)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    outgoing: HashMap<String, BTreeMap<String, BTreeSet<Term>>>,
    incoming: HashMap<Term, BTreeMap<String, BTreeSet<String>>>,
    by_relation: BTreeMap<String, Vec<usize>>,
    labels: HashMap<String, String>,
}

static EMPTY_TERMS: BTreeSet<Term> = BTreeSet::new();
static EMPTY_IDS: BTreeSet<String> = BTreeSet::new();

impl KnowledgeGraph {
    /// Builds the store. Duplicate triples are collapsed.
    pub fn from_triples(
        triples: impl IntoIterator<Item = Triple>,
        labels: HashMap<String, String>,
    ) -> Self {
        let mut triples: Vec<Triple> = triples.into_iter().collect();
        triples.sort();
        triples.dedup();

        let mut outgoing: HashMap<String, BTreeMap<String, BTreeSet<Term>>> = HashMap::new();
        let mut incoming: HashMap<Term, BTreeMap<String, BTreeSet<String>>> = HashMap::new();
        let mut by_relation: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, t) in triples.iter().enumerate() {
            outgoing
                .entry(t.subject.clone())
                .or_default()
                .entry(t.relation.clone())
                .or_default()
                .insert(t.object.clone());
            incoming
                .entry(t.object.clone())
                .or_default()
                .entry(t.relation.clone())
                .or_default()
                .insert(t.subject.clone());
            by_relation.entry(t.relation.clone()).or_default().push(i);
        }

        Self {
            triples,
            outgoing,
            incoming,
            by_relation,
            labels,
        }
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// `{ o | (s, r, o) }`
    pub fn neighbors_out(&self, subject: &str, relation: &str) -> &BTreeSet<Term> {
        self.outgoing
            .get(subject)
            .and_then(|m| m.get(relation))
            .unwrap_or(&EMPTY_TERMS)
    }

    /// `{ s | (s, r, o) }`
    pub fn neighbors_in(&self, object: &Term, relation: &str) -> &BTreeSet<String> {
        self.incoming
            .get(object)
            .and_then(|m| m.get(relation))
            .unwrap_or(&EMPTY_IDS)
    }

    /// All outgoing edges of `subject`, grouped by relation.
    pub fn out_edges(&self, subject: &str) -> impl Iterator<Item = (&str, &BTreeSet<Term>)> + '_ {
        self.outgoing
            .get(subject)
            .into_iter()
            .flat_map(|m| m.iter().map(|(r, os)| (r.as_str(), os)))
    }

    /// All incoming edges of `object`, grouped by relation.
    pub fn in_edges(&self, object: &Term) -> impl Iterator<Item = (&str, &BTreeSet<String>)> + '_ {
        self.incoming
            .get(object)
            .into_iter()
            .flat_map(|m| m.iter().map(|(r, ss)| (r.as_str(), ss)))
    }

    pub fn relation_count(&self, relation: &str) -> usize {
        self.by_relation.get(relation).map_or(0, Vec::len)
    }

    pub fn relation_triples(&self, relation: &str) -> impl Iterator<Item = &Triple> + '_ {
        self.by_relation
            .get(relation)
            .into_iter()
            .flatten()
            .map(|&i| &self.triples[i])
    }

    /// Relation ids in sorted order.
    pub fn relations(&self) -> impl Iterator<Item = &str> + '_ {
        self.by_relation.keys().map(String::as_str)
    }

    /// Keeps the relations that have at least one triple, preserving input order.
    pub fn relations_with_triples<S: AsRef<str>>(&self, relations: &[S]) -> Vec<String> {
        relations
            .iter()
            .map(AsRef::as_ref)
            .filter(|r| self.relation_count(r) > 0)
            .map(str::to_owned)
            .collect()
    }

    pub fn label(&self, id: &str) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    /// Label of `id`, or the id itself when unlabeled.
    pub fn label_or_id<'a>(&'a self, id: &'a str) -> &'a str {
        self.label(id).unwrap_or(id)
    }

    pub fn labels(&self) -> &HashMap<String, String> {
        &self.labels
    }

    /// Human-readable form of a term: entity label or literal value.
    pub fn display_term<'a>(&'a self, term: &'a Term) -> &'a str {
        match term {
            Term::Entity(id) => self.label_or_id(id),
            Term::Literal(v) => v,
        }
    }

    /// True when `id` occurs as a subject or as an entity object.
    pub fn has_entity(&self, id: &str) -> bool {
        self.outgoing.contains_key(id) || self.incoming.contains_key(&Term::Entity(id.to_owned()))
    }

    /// Resolves a bare id to the term it denotes in this graph, preferring entities.
    pub fn resolve(&self, id: &str) -> Option<Term> {
        if self.has_entity(id) {
            return Some(Term::Entity(id.to_owned()));
        }
        let lit = Term::Literal(id.to_owned());
        self.incoming.contains_key(&lit).then_some(lit)
    }

    /// Number of triples touching an entity in either position.
    pub fn degree(&self, id: &str) -> usize {
        let out: usize = self
            .outgoing
            .get(id)
            .map_or(0, |m| m.values().map(BTreeSet::len).sum());
        let inc: usize = self
            .incoming
            .get(&Term::Entity(id.to_owned()))
            .map_or(0, |m| m.values().map(BTreeSet::len).sum());
        out + inc
    }

    /// Sorted entity ids (subjects and entity objects).
    pub fn entities(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.outgoing.keys().map(String::as_str).collect();
        out.extend(self.incoming.keys().filter_map(|t| match t {
            Term::Entity(id) => Some(id.as_str()),
            Term::Literal(_) => None,
        }));
        out
    }

    pub fn stats(&self) -> KgStats {
        KgStats {
            triples: self.triples.len(),
            entities: self.entities().len(),
            relations: self.by_relation.len(),
            literals: self.incoming.keys().filter(|t| t.is_literal()).count(),
            labels: self.labels.len(),
        }
    }
}
