//! Shared generators and fixtures for the integration suites.
#![allow(dead_code)]

pub mod criteria;

use std::path::PathBuf;

use kgaug_core::augment::{QALPair, Source};
use kgaug_core::eval::load_dataset;
use kgaug_core::kg::{load_kg, KnowledgeGraph, Term, Triple};
use kgaug_core::lf::{CmpOp, SExpr};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::sample::select;
use proptest::strategy::BoxedStrategy;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn toy_kg() -> KnowledgeGraph {
    load_kg(&fixture("toy/triples.tsv"), Some(&fixture("toy/labels.tsv"))).expect("toy graph loads")
}

/// Dataset records as training pairs, with qid and answers attached.
pub fn toy_pairs(name: &str) -> Vec<QALPair> {
    load_dataset(&fixture(name))
        .expect("dataset loads")
        .into_iter()
        .map(|i| {
            let mut p = QALPair::new(&i.question, i.gold_form.clone().expect("gold form"), Source::Original)
                .with_meta("qid", &i.qid);
            p.answers = i.gold().into_iter().collect();
            p
        })
        .collect()
}

// Random graphs: entity edges over `r.e{n}`, literal attributes over `a.v{n}`.

pub const LITERALS: &[&str] = &[
    "-3", "0", "1", "2", "7", "12.5", "40", "100", "1999", "2001-05-17", "2010-01", "abc", "n/a",
];
pub const BOUNDS: &[&str] = &["0", "2", "7.5", "40", "1999", "2005-06-01"];

pub fn ent(i: usize) -> String {
    format!("m.e{i}")
}

pub fn edge_rel(i: usize) -> String {
    format!("r.e{i}")
}

pub fn attr_rel(i: usize) -> String {
    format!("a.v{i}")
}

#[derive(Debug, Clone)]
pub struct World {
    pub triples: Vec<Triple>,
    pub entities: usize,
    pub edges: usize,
    pub attrs: usize,
}

impl World {
    pub fn kg(&self) -> KnowledgeGraph {
        KnowledgeGraph::from_triples(self.triples.clone(), Default::default())
    }
}

/// At most 500 edge triples plus 300 attribute triples.
pub fn arb_world() -> impl Strategy<Value = World> {
    (2usize..30, 1usize..5, 1usize..3).prop_flat_map(|(n, edges, attrs)| {
        let edge = (0..n, 0..edges, 0..n).prop_map(|(s, r, o)| Triple::new(ent(s), edge_rel(r), Term::entity(ent(o))));
        let attr = (0..n, 0..attrs, select(LITERALS)).prop_map(|(s, a, v)| Triple::new(ent(s), attr_rel(a), Term::literal(v)));
        (vec(edge, 0..500), vec(attr, 0..300)).prop_map(move |(mut t, a)| {
            t.extend(a);
            World {
                triples: t,
                entities: n,
                edges,
                attrs,
            }
        })
    })
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    select(vec![CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge])
}

fn wrap_rel(name: BoxedStrategy<String>) -> BoxedStrategy<SExpr> {
    (name, 0u8..4)
        .prop_map(|(r, flip)| match flip {
            0 | 1 => SExpr::relation(r),
            2 => SExpr::reverse(SExpr::relation(r)),
            _ => SExpr::reverse(SExpr::reverse(SExpr::relation(r))),
        })
        .boxed()
}

/// Well-typed forms built from the given leaves, with COUNT only at the root.
pub fn forms(leaf: BoxedStrategy<SExpr>, rel: BoxedStrategy<SExpr>, bound: BoxedStrategy<SExpr>) -> BoxedStrategy<SExpr> {
    let compare = (cmp_op(), rel.clone(), bound).prop_map(|(op, r, l)| SExpr::compare(op, r, l));
    let base = prop_oneof![4 => leaf, 1 => compare].boxed();
    let set = base
        .prop_recursive(5, 32, 2, move |inner| {
            prop_oneof![
                4 => (rel.clone(), inner.clone()).prop_map(|(r, s)| SExpr::join(r, s)),
                2 => (inner.clone(), inner.clone()).prop_map(|(a, b)| SExpr::and(a, b)),
                1 => (inner.clone(), rel.clone()).prop_map(|(s, r)| SExpr::argmax(s, r)),
                1 => (inner, rel.clone()).prop_map(|(s, r)| SExpr::argmin(s, r)),
            ]
        })
        .boxed();
    prop_oneof![5 => set.clone(), 1 => set.prop_map(SExpr::count)].boxed()
}

/// Forms over the vocabulary of `w`, including ids absent from the graph.
pub fn world_forms(w: &World) -> BoxedStrategy<SExpr> {
    let n = w.entities + 2;
    let leaf = prop_oneof![
        6 => (0..n).prop_map(|i| SExpr::entity(ent(i))),
        1 => select(LITERALS).prop_map(SExpr::literal),
    ]
    .boxed();
    let names: Vec<String> = (0..w.edges).map(edge_rel).chain((0..w.attrs).map(attr_rel)).collect();
    let rel = wrap_rel(select(names).boxed());
    let bound = select(BOUNDS).prop_map(SExpr::literal).boxed();
    forms(leaf, rel, bound)
}

pub fn arb_world_and_forms(per_world: usize) -> impl Strategy<Value = (World, Vec<SExpr>)> {
    arb_world().prop_flat_map(move |w| {
        let f = vec(world_forms(&w), per_world);
        (Just(w), f)
    })
}

/// Forms with arbitrary leaf text, for syntax round-trips.
pub fn syntax_forms() -> BoxedStrategy<SExpr> {
    let entity = prop_oneof![
        3 => "[a-z]\\.[a-z0-9_]{1,8}",
        2 => "[A-Za-z0-9 ()\\[\\]\\\\\"^.@-]{0,12}",
        1 => "[0-9]{1,4}",
        1 => Just(String::new()),
    ]
    .prop_map(SExpr::entity);
    let datatype = proptest::option::of(select(vec![
        "http://www.w3.org/2001/XMLSchema#gYear".to_owned(),
        "http://www.w3.org/2001/XMLSchema#float".to_owned(),
        "xsd:int".to_owned(),
    ]));
    let value = prop_oneof!["-?[0-9]{1,5}(\\.[0-9]{1,3})?", "[ -~\\n\\t]{0,10}"];
    let literal = (value, datatype).prop_map(|(value, datatype)| SExpr::Literal { value, datatype });
    let leaf = prop_oneof![3 => entity, 1 => literal.clone()].boxed();
    let names = prop_oneof![
        8 => "[a-z][a-z0-9_]{0,6}(\\.[a-z][a-z0-9_]{0,6}){0,2}",
        1 => Just(String::new()),
    ]
    .boxed();
    forms(leaf, wrap_rel(names), literal.boxed())
}

/// Every entity id and relation id in `f`.
pub fn vocabulary(f: &SExpr) -> Vec<String> {
    let mut out = Vec::new();
    f.walk(&mut |n| match n {
        SExpr::Entity(e) | SExpr::Relation(e) if !e.is_empty() => out.push(e.clone()),
        _ => {}
    });
    out
}
