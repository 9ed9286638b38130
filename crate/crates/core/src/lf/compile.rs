//! Compilation of logical forms into SPARQL SELECT queries.
//!
//! Variables are named `?x0`, `?x1`, ... in the order the compiler first
//! needs them, which is a depth-first pre-order walk; `?x0` is always the
//! projected answer variable. Compiling the same form twice gives the same
//! text.

use std::fmt::Write as _;

use super::SExpr;
use crate::sparql::{encode_iri_part, literal_syntax, SparqlQuery};
use crate::value::{is_decimal, numeric_key};

const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("form contains an unfilled placeholder")]
    Placeholder,
    #[error("ill-typed form: {0}")]
    IllTyped(&'static str),
    #[error("comparison operand {0:?} is not numeric")]
    NonNumericOperand(String),
}

/// Compiles `f` to a query whose single projected variable is `x0`.
pub fn to_sparql(f: &SExpr, base_iri: &str) -> Result<SparqlQuery, CompileError> {
    let mut c = Compiler {
        base: base_iri,
        next: 0,
        out: String::new(),
        depth: 1,
    };
    let answer = c.fresh();
    match f {
        SExpr::Count(inner) => {
            let counted = c.fresh();
            c.set(inner, &counted)?;
            let body = std::mem::take(&mut c.out);
            let _ = write!(
                c.out,
                "SELECT (COUNT(DISTINCT ?{counted}) AS ?{answer}) WHERE {{\n{body}}}"
            );
        }
        _ => {
            c.set(f, &answer)?;
            let body = std::mem::take(&mut c.out);
            let _ = write!(c.out, "SELECT DISTINCT ?{answer} WHERE {{\n{body}}}");
        }
    }
    Ok(SparqlQuery {
        text: c.out,
        variable: answer,
    })
}

struct Compiler<'a> {
    base: &'a str,
    next: usize,
    out: String,
    depth: usize,
}

impl Compiler<'_> {
    fn fresh(&mut self) -> String {
        let v = format!("x{}", self.next);
        self.next += 1;
        v
    }

    fn line(&mut self, text: &str) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn iri(&self, id: &str) -> String {
        format!("<{}{}>", self.base, encode_iri_part(id))
    }

    fn literal(&self, value: &str, datatype: Option<&str>) -> String {
        let dt = datatype.map(|d| match d.strip_prefix("xsd:") {
            Some(local) => format!("{XSD}{local}"),
            None => d.to_owned(),
        });
        literal_syntax(value, dt.as_deref())
    }

    /// Constant term for an entity or literal leaf, `None` for anything else.
    fn constant(&self, f: &SExpr) -> Result<Option<String>, CompileError> {
        Ok(match f {
            SExpr::Entity(e) if e.is_empty() => return Err(CompileError::Placeholder),
            SExpr::Entity(e) => Some(self.iri(e)),
            SExpr::Literal { value, datatype } => Some(self.literal(value, datatype.as_deref())),
            _ => None,
        })
    }

    fn relation(&self, rel: &SExpr) -> Result<(bool, String), CompileError> {
        match rel {
            SExpr::Relation(r) if r.is_empty() => Err(CompileError::Placeholder),
            SExpr::Relation(r) => Ok((false, self.iri(r))),
            SExpr::Reverse(inner) => self.relation(inner).map(|(rev, r)| (!rev, r)),
            _ => Err(CompileError::IllTyped("expected relation")),
        }
    }

    /// Emits patterns restricting `?var` to the denotation of `f`.
    fn set(&mut self, f: &SExpr, var: &str) -> Result<(), CompileError> {
        if let Some(term) = self.constant(f)? {
            self.line(&format!("VALUES ?{var} {{ {term} }}"));
            return Ok(());
        }
        match f {
            SExpr::Join(rel, arg) => {
                let (reversed, r) = self.relation(rel)?;
                let other = match self.constant(arg)? {
                    Some(term) => term,
                    None => {
                        let v = self.fresh();
                        self.set(arg, &v)?;
                        format!("?{v}")
                    }
                };
                self.edge(&format!("?{var}"), reversed, &r, &other);
                Ok(())
            }
            SExpr::And(a, b) => {
                self.set(a, var)?;
                self.set(b, var)
            }
            SExpr::Argmax(set, rel) | SExpr::Argmin(set, rel) => {
                let (reversed, r) = self.relation(rel)?;
                let order = if matches!(f, SExpr::Argmax(..)) { "DESC" } else { "ASC" };
                self.line("{");
                self.depth += 1;
                self.line(&format!("SELECT ?{var} WHERE {{"));
                self.depth += 1;
                self.set(set, var)?;
                let n = self.fresh();
                self.edge(&format!("?{var}"), reversed, &r, &format!("?{n}"));
                self.depth -= 1;
                self.line("}");
                self.line(&format!("ORDER BY {order}(?{n}) ?{var}"));
                self.line("LIMIT 1");
                self.depth -= 1;
                self.line("}");
                Ok(())
            }
            SExpr::Compare(op, rel, lit) => {
                let SExpr::Literal { value, datatype } = lit.as_ref() else {
                    return Err(CompileError::IllTyped("comparison needs a literal"));
                };
                if numeric_key(value).is_none() {
                    return Err(CompileError::NonNumericOperand(value.clone()));
                }
                let (reversed, r) = self.relation(rel)?;
                let n = self.fresh();
                self.edge(&format!("?{var}"), reversed, &r, &format!("?{n}"));
                let bound = if datatype.is_none() && is_decimal(value) {
                    value.clone()
                } else {
                    self.literal(value, datatype.as_deref())
                };
                self.line(&format!("FILTER(?{n} {} {bound})", op.symbol()));
                Ok(())
            }
            SExpr::Count(_) => Err(CompileError::IllTyped("COUNT is only allowed at the top level")),
            SExpr::Relation(_) | SExpr::Reverse(_) => Err(CompileError::IllTyped("expected set, found relation")),
            SExpr::Entity(_) | SExpr::Literal { .. } => unreachable!("handled as constants"),
        }
    }

    /// `subject r object` seen from `?var`: forward puts `?var` in subject position.
    fn edge(&mut self, var: &str, reversed: bool, r: &str, other: &str) {
        if reversed {
            self.line(&format!("{other} {r} {var} ."));
        } else {
            self.line(&format!("{var} {r} {other} ."));
        }
    }
}
