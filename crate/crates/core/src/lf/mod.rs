//! S-expression logical forms.
//!
//! Grammar (operators are matched case-insensitively, printed canonically):
//!
//! ```text
//! set  := ENTITY | LITERAL
//!       | (JOIN rel set) | (AND set set)
//!       | (ARGMAX set rel) | (ARGMIN set rel)
//!       | (lt rel LITERAL) | (le ...) | (gt ...) | (ge ...)
//! rel  := RELATION | (R rel)
//! root := set | (COUNT set)
//! ```
//!
//! `(JOIN r o)` denotes the heads `s` of triples `(s, r, o)`; `(JOIN (R r) s)`
//! denotes the tails. Entities are bare ids (`m.01x`) or bracketed labels
//! (`[ Barack Obama ]`); `[]` is the anonymous placeholder used by skeletons.

mod compile;
mod interpret;
mod labels;
mod parse;
mod skeleton;
mod slots;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use compile::{to_sparql, CompileError};
pub use interpret::{interpret, InterpretError};
pub use labels::{delabelize, labelize, LabelIndex};
pub use parse::{parse, ParseError, ParseErrorKind};
pub use skeleton::{skeleton, Skeleton};
pub use slots::{get as slot_at, slots, substitute, SlotError, SlotKind, SlotRef};
pub(crate) use slots::get_mut as slot_at_mut;

use crate::value::is_decimal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 4] = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn keyword(self) -> &'static str {
        match self {
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SExpr {
    /// Entity id, or a label after [`labelize`]. Empty text is the placeholder.
    Entity(String),
    Literal {
        value: String,
        datatype: Option<String>,
    },
    /// Relation id. Empty text is the placeholder.
    Relation(String),
    Reverse(Box<SExpr>),
    Join(Box<SExpr>, Box<SExpr>),
    And(Box<SExpr>, Box<SExpr>),
    Count(Box<SExpr>),
    Argmax(Box<SExpr>, Box<SExpr>),
    Argmin(Box<SExpr>, Box<SExpr>),
    Compare(CmpOp, Box<SExpr>, Box<SExpr>),
}

impl SExpr {
    pub fn entity(id: impl Into<String>) -> Self {
        SExpr::Entity(id.into())
    }

    pub fn literal(value: impl Into<String>) -> Self {
        SExpr::Literal {
            value: value.into(),
            datatype: None,
        }
    }

    pub fn relation(id: impl Into<String>) -> Self {
        SExpr::Relation(id.into())
    }

    pub fn reverse(rel: SExpr) -> Self {
        SExpr::Reverse(Box::new(rel))
    }

    pub fn join(rel: SExpr, arg: SExpr) -> Self {
        SExpr::Join(Box::new(rel), Box::new(arg))
    }

    pub fn and(a: SExpr, b: SExpr) -> Self {
        SExpr::And(Box::new(a), Box::new(b))
    }

    pub fn count(a: SExpr) -> Self {
        SExpr::Count(Box::new(a))
    }

    pub fn argmax(set: SExpr, rel: SExpr) -> Self {
        SExpr::Argmax(Box::new(set), Box::new(rel))
    }

    pub fn argmin(set: SExpr, rel: SExpr) -> Self {
        SExpr::Argmin(Box::new(set), Box::new(rel))
    }

    pub fn compare(op: CmpOp, rel: SExpr, lit: SExpr) -> Self {
        SExpr::Compare(op, Box::new(rel), Box::new(lit))
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, SExpr::Entity(_) | SExpr::Literal { .. } | SExpr::Relation(_))
    }

    pub fn is_relation_expr(&self) -> bool {
        matches!(self, SExpr::Relation(_) | SExpr::Reverse(_))
    }

    pub fn children(&self) -> Vec<&SExpr> {
        match self {
            SExpr::Entity(_) | SExpr::Literal { .. } | SExpr::Relation(_) => vec![],
            SExpr::Reverse(a) | SExpr::Count(a) => vec![a],
            SExpr::Join(a, b)
            | SExpr::And(a, b)
            | SExpr::Argmax(a, b)
            | SExpr::Argmin(a, b)
            | SExpr::Compare(_, a, b) => vec![a, b],
        }
    }

    pub(crate) fn children_mut(&mut self) -> Vec<&mut SExpr> {
        match self {
            SExpr::Entity(_) | SExpr::Literal { .. } | SExpr::Relation(_) => vec![],
            SExpr::Reverse(a) | SExpr::Count(a) => vec![a],
            SExpr::Join(a, b)
            | SExpr::And(a, b)
            | SExpr::Argmax(a, b)
            | SExpr::Argmin(a, b)
            | SExpr::Compare(_, a, b) => vec![a, b],
        }
    }

    /// True if the tree uses COUNT, ARGMAX/ARGMIN or a comparison.
    pub fn has_aggregate(&self) -> bool {
        match self {
            SExpr::Count(_) | SExpr::Argmax(..) | SExpr::Argmin(..) | SExpr::Compare(..) => true,
            _ => self.children().into_iter().any(SExpr::has_aggregate),
        }
    }

    /// Entity texts in pre-order.
    pub fn entities(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let SExpr::Entity(e) = n {
                out.push(e.as_str());
            }
        });
        out
    }

    /// Relation ids in pre-order.
    pub fn relations(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let SExpr::Relation(r) = n {
                out.push(r.as_str());
            }
        });
        out
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a SExpr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Canonical text form.
    pub fn serialize(&self) -> String {
        self.to_string()
    }

    fn write_to(&self, out: &mut String) {
        match self {
            SExpr::Entity(e) => write_entity(out, e),
            SExpr::Literal { value, datatype } => write_literal(out, value, datatype.as_deref()),
            SExpr::Relation(r) if r.is_empty() => out.push_str("[]"),
            SExpr::Relation(r) => out.push_str(r),
            SExpr::Compare(op, a, b) => {
                out.push('(');
                out.push_str(op.keyword());
                for c in [a, b] {
                    out.push(' ');
                    c.write_to(out);
                }
                out.push(')');
            }
            _ => {
                out.push('(');
                out.push_str(self.operator());
                for c in self.children() {
                    out.push(' ');
                    c.write_to(out);
                }
                out.push(')');
            }
        }
    }

    pub(crate) fn operator(&self) -> &'static str {
        match self {
            SExpr::Reverse(_) => "R",
            SExpr::Join(..) => "JOIN",
            SExpr::And(..) => "AND",
            SExpr::Count(_) => "COUNT",
            SExpr::Argmax(..) => "ARGMAX",
            SExpr::Argmin(..) => "ARGMIN",
            SExpr::Compare(op, ..) => op.keyword(),
            SExpr::Entity(_) | SExpr::Literal { .. } | SExpr::Relation(_) => "",
        }
    }
}

fn is_special(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | '"')
}

pub(crate) fn is_bare_token(s: &str) -> bool {
    !s.is_empty() && !s.contains(is_special) && !s.contains("^^")
}

fn write_entity(out: &mut String, e: &str) {
    if is_bare_token(e) && !is_decimal(e) {
        out.push_str(e);
    } else if e.is_empty() {
        out.push_str("[]");
    } else {
        out.push_str("[ ");
        for c in e.chars() {
            if matches!(c, ']' | '\\') {
                out.push('\\');
            }
            out.push(c);
        }
        out.push_str(" ]");
    }
}

fn write_literal(out: &mut String, value: &str, datatype: Option<&str>) {
    let dt_ok = datatype.is_none_or(is_bare_token);
    match datatype {
        None if is_decimal(value) => out.push_str(value),
        Some(dt) if dt_ok && is_bare_token(value) => {
            let _ = write!(out, "{value}^^{dt}");
        }
        _ => {
            out.push('"');
            for c in value.chars() {
                match c {
                    '"' | '\\' => {
                        out.push('\\');
                        out.push(c);
                    }
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    '\r' => out.push_str("\\r"),
                    c => out.push(c),
                }
            }
            out.push('"');
            if let Some(dt) = datatype.filter(|_| dt_ok) {
                let _ = write!(out, "^^{dt}");
            }
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_to(&mut s);
        f.write_str(&s)
    }
}

impl std::str::FromStr for SExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for SExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}
