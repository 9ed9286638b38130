use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use super::SimilarityIndex;
use crate::candidates::CandidateList;
use crate::lf::{slots, substitute, SExpr, SlotKind, SlotRef};
use crate::Score;

struct Entry<S> {
    score: S,
    text: String,
    choice: Vec<usize>,
}

impl<S: Score> PartialEq for Entry<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: Score> Eq for Entry<S> {}

impl<S: Score> PartialOrd for Entry<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Score> Ord for Entry<S> {
    /// Higher score first, then smaller text.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .partial_cmp(&other.score)
            .expect("finite scores")
            .then_with(|| Reverse(&self.text).cmp(&Reverse(&other.text)))
    }
}

fn product<S: Score>(options: &[Vec<S>], choice: &[usize]) -> S {
    options.iter().zip(choice).fold(S::one(), |acc, (o, &i)| acc * o[i])
}

/// The `cap` best index combinations over per-slot scores (each sorted
/// descending, all non-negative), by product of scores, ties by `text`.
///
/// Walks the combination lattice best-first, so only combinations near the
/// frontier are materialised.
pub(crate) fn best_combos<S: Score>(
    options: &[Vec<S>],
    cap: usize,
    text: impl Fn(&[usize]) -> String,
) -> Vec<(Vec<usize>, S)> {
    if cap == 0 || options.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let start = vec![0; options.len()];
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::from([start.clone()]);
    heap.push(Entry {
        score: product(options, &start),
        text: text(&start),
        choice: start,
    });
    let mut taken: Vec<Entry<S>> = Vec::new();
    while let Some(top) = heap.peek() {
        // popped scores never increase, so past the cap only ties can still matter
        if taken.len() >= cap && top.score < taken[cap - 1].score {
            break;
        }
        let e = heap.pop().expect("peeked");
        for pos in 0..options.len() {
            let mut next = e.choice.clone();
            next[pos] += 1;
            if next[pos] < options[pos].len() && seen.insert(next.clone()) {
                heap.push(Entry {
                    score: product(options, &next),
                    text: text(&next),
                    choice: next,
                });
            }
        }
        taken.push(e);
    }
    taken.sort_by(|a, b| b.cmp(a));
    taken.truncate(cap);
    taken.into_iter().map(|e| (e.choice, e.score)).collect()
}

fn leaf_text(leaf: &SExpr) -> Option<&str> {
    match leaf {
        SExpr::Entity(s) | SExpr::Relation(s) => Some(s),
        _ => None,
    }
}

fn make_leaf(kind: SlotKind, id: String) -> SExpr {
    match kind {
        SlotKind::Relation => SExpr::Relation(id),
        _ => SExpr::Entity(id),
    }
}

fn fill(f: &SExpr, slots: &[SlotRef], values: &[&SExpr]) -> SExpr {
    slots.iter().zip(values).fold(f.clone(), |acc, (slot, v)| {
        substitute(&acc, slot, (*v).clone()).expect("slot taken from this form")
    })
}

fn refine_slots<S: Score>(
    c: &CandidateList<S>,
    kind: SlotKind,
    k: usize,
    combo_cap: usize,
    index: &SimilarityIndex<S>,
) -> CandidateList<S> {
    let mut cache: HashMap<String, Vec<(String, S)>> = HashMap::new();
    let mut out = Vec::new();
    for (cand, f) in c.parsed() {
        let targets: Vec<SlotRef> = slots(f).into_iter().filter(|s| s.kind == kind).collect();
        let mut leaves: Vec<Vec<SExpr>> = Vec::with_capacity(targets.len());
        let mut scores: Vec<Vec<S>> = Vec::with_capacity(targets.len());
        for slot in &targets {
            let original = crate::lf::slot_at(f, &slot.path).expect("slot of this form");
            let query = leaf_text(original).unwrap_or_default();
            let hits = cache
                .entry(query.to_owned())
                .or_insert_with(|| index.retrieve(query, k))
                .clone();
            if hits.is_empty() {
                leaves.push(vec![original.clone()]);
                scores.push(vec![S::one()]);
            } else {
                let (ids, s): (Vec<String>, Vec<S>) = hits.into_iter().unzip();
                leaves.push(ids.into_iter().map(|id| make_leaf(kind, id)).collect());
                scores.push(s);
            }
        }
        let build = |choice: &[usize]| {
            let values: Vec<&SExpr> = choice.iter().enumerate().map(|(i, &j)| &leaves[i][j]).collect();
            fill(f, &targets, &values)
        };
        for (choice, score) in best_combos(&scores, combo_cap, |ch| build(ch).to_string()) {
            out.push((build(&choice), score, Some(cand.rank)));
        }
    }
    CandidateList::from_forms(c.question.clone(), out)
}

/// Replaces every entity slot of each parseable candidate with combinations
/// of its `k` nearest entities. Output is candidate-major; within a
/// candidate, combinations are ordered by product of slot scores.
pub fn refine_entities<S: Score>(
    c: &CandidateList<S>,
    k: usize,
    combo_cap: usize,
    index: &SimilarityIndex<S>,
) -> CandidateList<S> {
    refine_slots(c, SlotKind::Entity, k, combo_cap, index)
}

/// Same as [`refine_entities`] over relation slots.
pub fn refine_relations<S: Score>(
    c: &CandidateList<S>,
    k: usize,
    combo_cap: usize,
    index: &SimilarityIndex<S>,
) -> CandidateList<S> {
    refine_slots(c, SlotKind::Relation, k, combo_cap, index)
}
