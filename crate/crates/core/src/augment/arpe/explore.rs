use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Direction, EdgePlan, ReasoningPattern, ANSWER_NODE};
use crate::kg::{substream, KnowledgeGraph, Term};

pub const DEFAULT_FAN_OUT: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PathStep {
    pub parent: Term,
    pub relation: String,
    pub direction: Direction,
    pub child: Term,
}

/// One walk of a pattern's edge plan starting at the answer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ExploredPath {
    pub answer: Term,
    /// One step per pattern edge, in plan order.
    pub steps: Vec<PathStep>,
    /// Binding of every pattern node; index 0 is the answer.
    pub nodes: Vec<Term>,
}

impl ExploredPath {
    pub fn relations(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.relation.as_str()).collect()
    }

    /// Key-entity bindings in node order.
    pub fn keys<'a>(&'a self, pattern: &'a ReasoningPattern) -> impl Iterator<Item = &'a Term> + 'a {
        pattern.key_nodes().map(|n| &self.nodes[n])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploreConfig {
    pub n: usize,
    pub fan_out: usize,
    pub seed: u64,
    /// Upper bound on candidate expansions per answer.
    pub max_expansions: usize,
}

impl ExploreConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            fan_out: DEFAULT_FAN_OUT,
            seed,
            max_expansions: 100_000,
        }
    }
}

pub fn explore_paths(pattern: &ReasoningPattern, answer: &Term, n: usize, kg: &KnowledgeGraph, seed: u64) -> Vec<ExploredPath> {
    explore_paths_with(pattern, answer, &ExploreConfig::new(n, seed), kg)
}

/// Seeded depth-first walk over the pattern's edges from `answer`.
///
/// At each edge the candidate `(relation, node)` pairs are shuffled (or
/// sampled down to `fan_out`) with a stream keyed by the seed, pattern and
/// answer. All bound nodes must be pairwise distinct. Paths with the same
/// relations and key entities count once.
pub fn explore_paths_with(pattern: &ReasoningPattern, answer: &Term, cfg: &ExploreConfig, kg: &KnowledgeGraph) -> Vec<ExploredPath> {
    if cfg.n == 0 {
        return Vec::new();
    }
    let key = format!("{}\u{1f}{:?}", pattern.skeleton, answer);
    let mut walk = Walk {
        pattern,
        kg,
        cfg,
        rng: substream(cfg.seed, "arpe-explore", &key),
        nodes: vec![None; pattern.nodes.len()],
        steps: Vec::with_capacity(pattern.edges.len()),
        seen: BTreeSet::new(),
        out: Vec::new(),
        budget: cfg.max_expansions,
    };
    walk.nodes[ANSWER_NODE] = Some(answer.clone());
    walk.dfs(0);
    walk.out
}

struct Walk<'a> {
    pattern: &'a ReasoningPattern,
    kg: &'a KnowledgeGraph,
    cfg: &'a ExploreConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Option<Term>>,
    steps: Vec<PathStep>,
    seen: BTreeSet<(Vec<String>, Vec<Term>)>,
    out: Vec<ExploredPath>,
    budget: usize,
}

impl Walk<'_> {
    fn done(&self) -> bool {
        self.out.len() >= self.cfg.n || self.budget == 0
    }

    fn candidates(&mut self, edge: &EdgePlan) -> Vec<(String, Term)> {
        let parent = self.nodes[edge.parent].as_ref().expect("parent bound before child");
        let mut cands: Vec<(String, Term)> = match edge.direction {
            Direction::Forward => self
                .kg
                .in_edges(parent)
                .flat_map(|(r, subjects)| subjects.iter().map(move |s| (r.to_owned(), Term::Entity(s.clone()))))
                .collect(),
            Direction::Reverse => match parent {
                Term::Entity(id) => self
                    .kg
                    .out_edges(id)
                    .flat_map(|(r, objects)| objects.iter().map(move |o| (r.to_owned(), o.clone())))
                    .collect(),
                Term::Literal(_) => Vec::new(),
            },
        };
        cands.retain(|(_, t)| !self.nodes.iter().flatten().any(|b| b == t));
        if cands.len() > self.cfg.fan_out {
            cands = cands.choose_multiple(&mut self.rng, self.cfg.fan_out).cloned().collect();
        } else {
            cands.shuffle(&mut self.rng);
        }
        cands
    }

    fn dfs(&mut self, edge_index: usize) {
        let pattern = self.pattern;
        let Some(edge) = pattern.edges.get(edge_index) else {
            self.record();
            return;
        };
        let parent = self.nodes[edge.parent].clone().expect("parent bound");
        for (relation, child) in self.candidates(edge) {
            if self.done() {
                return;
            }
            self.budget -= 1;
            self.nodes[edge.child] = Some(child.clone());
            self.steps.push(PathStep {
                parent: parent.clone(),
                relation,
                direction: edge.direction,
                child,
            });
            self.dfs(edge_index + 1);
            self.steps.pop();
            self.nodes[edge.child] = None;
        }
    }

    fn record(&mut self) {
        let nodes: Vec<Term> = self.nodes.iter().map(|n| n.clone().expect("all nodes bound")).collect();
        let relations: Vec<String> = self.steps.iter().map(|s| s.relation.clone()).collect();
        let keys: Vec<Term> = self.pattern.key_nodes().map(|i| nodes[i].clone()).collect();
        if self.seen.insert((relations, keys)) {
            self.out.push(ExploredPath {
                answer: nodes[ANSWER_NODE].clone(),
                steps: self.steps.clone(),
                nodes,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::kg::Triple;
    use crate::lf::{parse, skeleton};

    fn pattern(f: &str) -> ReasoningPattern {
        ReasoningPattern::from_skeleton(&skeleton(&parse(f).unwrap())).unwrap()
    }

    #[test]
    fn single_edge() {
        let kg = KnowledgeGraph::from_triples([Triple::new("A", "r", Term::entity("B"))], HashMap::new());
        let paths = explore_paths(&pattern("(JOIN (R r) A)"), &Term::entity("B"), 3, &kg, 1);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].relations(), vec!["r"]);
        assert_eq!(paths[0].nodes, vec![Term::entity("B"), Term::entity("A")]);
    }

    #[test]
    fn no_incoming_edges() {
        let kg = KnowledgeGraph::from_triples([Triple::new("A", "r", Term::entity("B"))], HashMap::new());
        assert!(explore_paths(&pattern("(JOIN (R r) A)"), &Term::entity("A"), 3, &kg, 1).is_empty());
        assert!(explore_paths(&pattern("(JOIN (R r) A)"), &Term::entity("Z"), 3, &kg, 1).is_empty());
    }

    #[test]
    fn caps_and_determinism() {
        let triples: Vec<Triple> = (0..20).map(|i| Triple::new(format!("s{i}"), "r", Term::entity("hub"))).collect();
        let kg = KnowledgeGraph::from_triples(triples, HashMap::new());
        let p = pattern("(JOIN (R r) A)");
        let a = explore_paths(&p, &Term::entity("hub"), 5, &kg, 7);
        assert_eq!(a.len(), 5);
        assert_eq!(a, explore_paths(&p, &Term::entity("hub"), 5, &kg, 7));
        let mut cfg = ExploreConfig::new(100, 7);
        cfg.fan_out = 4;
        assert_eq!(explore_paths_with(&p, &Term::entity("hub"), &cfg, &kg).len(), 4);
    }

    #[test]
    fn nodes_are_distinct() {
        // A -r-> B and B -r-> A: a two-hop walk from A must not come back to A
        let kg = KnowledgeGraph::from_triples(
            [
                Triple::new("A", "r", Term::entity("B")),
                Triple::new("B", "r", Term::entity("A")),
            ],
            HashMap::new(),
        );
        let p = pattern("(JOIN (R r) (JOIN (R r) X))");
        assert!(explore_paths(&p, &Term::entity("A"), 10, &kg, 0).is_empty());
    }
}
