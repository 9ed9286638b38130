//! Direct denotational evaluation of logical forms against the store.
//!
//! This is deliberately naive set arithmetic over the adjacency indices and
//! shares no code with the SPARQL compiler or engine; the two are checked
//! against each other.

use std::collections::BTreeSet;

use super::{CmpOp, SExpr};
use crate::kg::{AnswerSet, KnowledgeGraph, Term};
use crate::value::numeric_key;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterpretError {
    #[error("comparison operand {0:?} is not numeric")]
    NonNumericOperand(String),
    #[error("ill-typed form: {0}")]
    IllTyped(&'static str),
    #[error("form contains an unfilled placeholder")]
    Placeholder,
}

/// Evaluates `f`; the result is sorted by term order.
pub fn interpret(f: &SExpr, kg: &KnowledgeGraph) -> Result<AnswerSet, InterpretError> {
    let set = match f {
        SExpr::Count(inner) => {
            let n = eval(inner, kg)?.len();
            BTreeSet::from([Term::Literal(n.to_string())])
        }
        other => eval(other, kg)?,
    };
    Ok(set.into_iter().collect())
}

/// Returns (reversed, relation id).
fn relation(rel: &SExpr) -> Result<(bool, &str), InterpretError> {
    match rel {
        SExpr::Relation(r) if r.is_empty() => Err(InterpretError::Placeholder),
        SExpr::Relation(r) => Ok((false, r)),
        SExpr::Reverse(inner) => relation(inner).map(|(rev, r)| (!rev, r)),
        _ => Err(InterpretError::IllTyped("expected relation")),
    }
}

/// Terms one hop from `x` along `r`: subject to object when `forward`,
/// object to subject otherwise.
fn follow(kg: &KnowledgeGraph, x: &Term, forward: bool, r: &str) -> Vec<Term> {
    if forward {
        match x {
            Term::Entity(s) => kg.neighbors_out(s, r).iter().cloned().collect(),
            Term::Literal(_) => Vec::new(),
        }
    } else {
        kg.neighbors_in(x, r).iter().cloned().map(Term::Entity).collect()
    }
}

fn eval(f: &SExpr, kg: &KnowledgeGraph) -> Result<BTreeSet<Term>, InterpretError> {
    match f {
        SExpr::Entity(e) if e.is_empty() => Err(InterpretError::Placeholder),
        SExpr::Entity(e) => Ok(BTreeSet::from([Term::Entity(e.clone())])),
        SExpr::Literal { value, .. } => Ok(BTreeSet::from([Term::Literal(value.clone())])),
        SExpr::Join(rel, arg) => {
            // (JOIN r S) maps objects in S to their subjects; (JOIN (R r) S) the reverse
            let (reversed, r) = relation(rel)?;
            let mut out = BTreeSet::new();
            for x in &eval(arg, kg)? {
                out.extend(follow(kg, x, reversed, r));
            }
            Ok(out)
        }
        SExpr::And(a, b) => {
            let a = eval(a, kg)?;
            let b = eval(b, kg)?;
            Ok(a.intersection(&b).cloned().collect())
        }
        SExpr::Argmax(set, rel) | SExpr::Argmin(set, rel) => {
            let maximize = matches!(f, SExpr::Argmax(..));
            let (reversed, r) = relation(rel)?;
            let members = eval(set, kg)?;
            let mut best: Option<(f64, &Term)> = None;
            for x in &members {
                // members iterate in ascending term order, so strict improvement keeps the smallest on ties
                for v in follow(kg, x, !reversed, r) {
                    let Some(key) = numeric_key(v.as_str()).filter(|_| v.is_literal()) else {
                        continue;
                    };
                    let better = match best {
                        None => true,
                        Some((b, _)) if maximize => key > b,
                        Some((b, _)) => key < b,
                    };
                    if better {
                        best = Some((key, x));
                    }
                }
            }
            Ok(best.into_iter().map(|(_, x)| x.clone()).collect())
        }
        SExpr::Compare(op, rel, lit) => {
            let SExpr::Literal { value, .. } = lit.as_ref() else {
                return Err(InterpretError::IllTyped("comparison needs a literal"));
            };
            let bound = numeric_key(value).ok_or_else(|| InterpretError::NonNumericOperand(value.clone()))?;
            let (reversed, r) = relation(rel)?;
            Ok(compare_members(kg, *op, reversed, r, bound))
        }
        SExpr::Count(_) => Err(InterpretError::IllTyped("COUNT is only allowed at the top level")),
        SExpr::Relation(_) | SExpr::Reverse(_) => Err(InterpretError::IllTyped("expected set, found relation")),
    }
}

fn compare_members(kg: &KnowledgeGraph, op: CmpOp, reversed: bool, r: &str, bound: f64) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    for t in kg.relation_triples(r) {
        let (member, value) = if reversed {
            (t.object.clone(), Term::Entity(t.subject.clone()))
        } else {
            (Term::Entity(t.subject.clone()), t.object.clone())
        };
        if !value.is_literal() {
            continue;
        }
        if numeric_key(value.as_str()).is_some_and(|k| op.holds(k, bound)) {
            out.insert(member);
        }
    }
    out
}
