//! A small SPARQL evaluator over [`KnowledgeGraph`].
//!
//! Nested groups and sub-selects are evaluated on their own and then joined
//! with the enclosing solutions, so results never depend on pattern order.
//! Filters apply to the solutions of the group that contains them.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use super::{decode_iri_part, SparqlError, SparqlQuery};
use crate::kg::{AnswerSet, KnowledgeGraph, Term};
use crate::lf::CmpOp;
use crate::value::numeric_key;

pub struct InMemoryEngine<'a> {
    kg: &'a KnowledgeGraph,
    base: String,
}

impl<'a> InMemoryEngine<'a> {
    pub fn new(kg: &'a KnowledgeGraph, base_iri: &str) -> Self {
        Self {
            kg,
            base: base_iri.to_owned(),
        }
    }

    /// Values bound to the query's projected variable, sorted by term order.
    pub fn run(&self, query: &SparqlQuery) -> Result<AnswerSet, SparqlError> {
        let select = parse(&query.text, &self.base)?;
        let rows = self.select(&select);
        let values: BTreeSet<Term> = rows
            .into_iter()
            .filter_map(|mut row| row.remove(&query.variable))
            .collect();
        Ok(values.into_iter().collect())
    }

    fn select(&self, s: &Select) -> Vec<Row> {
        let mut rows = self.group(&s.group);
        for key in s.order.iter().rev() {
            match key {
                OrderKey::Asc(v) | OrderKey::Desc(v) => {
                    rows.retain(|r| r.get(v).and_then(numeric).is_some());
                    let desc = matches!(key, OrderKey::Desc(_));
                    rows.sort_by(|a, b| {
                        let (x, y) = (numeric(&a[v]).unwrap(), numeric(&b[v]).unwrap());
                        let o = x.partial_cmp(&y).unwrap_or(Ordering::Equal);
                        if desc { o.reverse() } else { o }
                    });
                }
                OrderKey::Term(v) => rows.sort_by(|a, b| a.get(v).cmp(&b.get(v))),
            }
        }
        let mut rows = match &s.projection {
            Projection::All => rows,
            Projection::Vars(vars) => rows
                .into_iter()
                .map(|r| r.into_iter().filter(|(k, _)| vars.contains(k)).collect())
                .collect(),
            Projection::Count { var, distinct, alias } => {
                let bound = rows.iter().filter_map(|r| r.get(var));
                let n = if *distinct {
                    bound.collect::<BTreeSet<_>>().len()
                } else {
                    bound.count()
                };
                vec![Row::from([(alias.clone(), Term::Literal(n.to_string()))])]
            }
        };
        if s.distinct {
            let mut seen = BTreeSet::new();
            rows.retain(|r| seen.insert(r.clone()));
        }
        if let Some(limit) = s.limit {
            rows.truncate(limit);
        }
        rows
    }

    fn group(&self, g: &Group) -> Vec<Row> {
        let mut rows = vec![Row::new()];
        for el in &g.elements {
            rows = match el {
                Element::Triple(s, p, o) => self.extend_triple(rows, s, p, o),
                Element::Values(var, terms) => {
                    let table: Vec<Row> = terms.iter().map(|t| Row::from([(var.clone(), t.clone())])).collect();
                    join(rows, &table)
                }
                Element::Group(inner) => join(rows, &self.group(inner)),
                Element::SubSelect(inner) => join(rows, &self.select(inner)),
                Element::Filter(_) => rows,
            };
            if rows.is_empty() {
                break;
            }
        }
        for el in &g.elements {
            if let Element::Filter(f) = el {
                rows.retain(|r| f.holds(r));
            }
        }
        rows
    }

    fn extend_triple(&self, rows: Vec<Row>, s: &Pat, p: &str, o: &Pat) -> Vec<Row> {
        let mut out = Vec::new();
        for row in rows {
            let subject = s.resolve(&row);
            let object = o.resolve(&row);
            let matches: Vec<(String, Term)> = match (&subject, &object) {
                (Some(Term::Literal(_)), _) => Vec::new(),
                (Some(Term::Entity(sub)), Some(obj)) => {
                    if self.kg.neighbors_out(sub, p).contains(obj) {
                        vec![(sub.clone(), obj.clone())]
                    } else {
                        Vec::new()
                    }
                }
                (Some(Term::Entity(sub)), None) => self
                    .kg
                    .neighbors_out(sub, p)
                    .iter()
                    .map(|obj| (sub.clone(), obj.clone()))
                    .collect(),
                (None, Some(obj)) => self
                    .kg
                    .neighbors_in(obj, p)
                    .iter()
                    .map(|sub| (sub.clone(), obj.clone()))
                    .collect(),
                (None, None) => self
                    .kg
                    .relation_triples(p)
                    .map(|t| (t.subject.clone(), t.object.clone()))
                    .collect(),
            };
            for (sub, obj) in matches {
                let mut r = row.clone();
                if bind(&mut r, s, Term::Entity(sub)) && bind(&mut r, o, obj) {
                    out.push(r);
                }
            }
        }
        out
    }
}

type Row = BTreeMap<String, Term>;

fn numeric(t: &Term) -> Option<f64> {
    match t {
        Term::Literal(v) => numeric_key(v),
        Term::Entity(_) => None,
    }
}

/// Binds a variable pattern, failing if it is already bound differently
/// (the same variable can appear twice in one triple).
fn bind(row: &mut Row, pat: &Pat, value: Term) -> bool {
    match pat {
        Pat::Const(_) => true,
        Pat::Var(v) => match row.get(v) {
            Some(existing) => *existing == value,
            None => {
                row.insert(v.clone(), value);
                true
            }
        },
    }
}

fn compatible(a: &Row, b: &Row) -> bool {
    b.iter().all(|(k, v)| a.get(k).is_none_or(|w| w == v))
}

fn join(left: Vec<Row>, right: &[Row]) -> Vec<Row> {
    let mut out = Vec::new();
    for l in &left {
        for r in right {
            if compatible(l, r) {
                let mut m = l.clone();
                m.extend(r.iter().map(|(k, v)| (k.clone(), v.clone())));
                out.push(m);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Pat {
    Var(String),
    Const(Term),
}

impl Pat {
    fn resolve(&self, row: &Row) -> Option<Term> {
        match self {
            Pat::Var(v) => row.get(v).cloned(),
            Pat::Const(t) => Some(t.clone()),
        }
    }
}

#[derive(Debug)]
struct Filter {
    var: String,
    op: CmpOp,
    bound: f64,
}

impl Filter {
    fn holds(&self, row: &Row) -> bool {
        row.get(&self.var)
            .and_then(numeric)
            .is_some_and(|v| self.op.holds(v, self.bound))
    }
}

#[derive(Debug)]
enum Element {
    Triple(Pat, String, Pat),
    Values(String, Vec<Term>),
    Group(Group),
    SubSelect(Box<Select>),
    Filter(Filter),
}

#[derive(Debug, Default)]
struct Group {
    elements: Vec<Element>,
}

#[derive(Debug)]
enum Projection {
    All,
    Vars(Vec<String>),
    Count { var: String, distinct: bool, alias: String },
}

#[derive(Debug)]
enum OrderKey {
    Asc(String),
    Desc(String),
    Term(String),
}

#[derive(Debug)]
struct Select {
    distinct: bool,
    projection: Projection,
    group: Group,
    order: Vec<OrderKey>,
    limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    Iri(String),
    Literal(String),
    Number(String),
    Punct(&'static str),
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, SparqlError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let err = |offset: usize, message: &str| SparqlError::Syntax {
        offset,
        message: message.to_owned(),
    };
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(c) = at(i) {
        let start = chars[i].0;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while at(i).is_some_and(|c| c != '\n') {
                i += 1;
            }
            continue;
        }
        let tok = match c {
            '<' if looks_like_iri(&chars[i + 1..]) => {
                let mut iri = String::new();
                i += 1;
                loop {
                    match at(i) {
                        Some('>') => break,
                        Some(c) => iri.push(c),
                        None => return Err(err(start, "unterminated IRI")),
                    }
                    i += 1;
                }
                i += 1;
                Tok::Iri(iri)
            }
            '<' | '>' | '=' | '!' => {
                let two = at(i + 1) == Some('=');
                i += if two { 2 } else { 1 };
                Tok::Punct(match (c, two) {
                    ('<', false) => "<",
                    ('<', true) => "<=",
                    ('>', false) => ">",
                    ('>', true) => ">=",
                    ('=', _) => "=",
                    ('!', true) => "!=",
                    _ => return Err(err(start, "unexpected '!'")),
                })
            }
            '"' => {
                let mut value = String::new();
                i += 1;
                loop {
                    match at(i) {
                        Some('"') => break,
                        Some('\\') => {
                            value.push(match at(i + 1) {
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('r') => '\r',
                                Some(c) => c,
                                None => return Err(err(start, "unterminated string")),
                            });
                            i += 1;
                        }
                        Some(c) => value.push(c),
                        None => return Err(err(start, "unterminated string")),
                    }
                    i += 1;
                }
                i += 1;
                // datatype and language tags do not affect matching
                if at(i) == Some('^') && at(i + 1) == Some('^') && at(i + 2) == Some('<') {
                    i += 3;
                    while at(i).is_some_and(|c| c != '>') {
                        i += 1;
                    }
                    if at(i).is_none() {
                        return Err(err(start, "unterminated datatype IRI"));
                    }
                    i += 1;
                } else if at(i) == Some('@') {
                    i += 1;
                    while at(i).is_some_and(|c| c.is_alphanumeric() || c == '-') {
                        i += 1;
                    }
                }
                Tok::Literal(value)
            }
            '?' | '$' => {
                let mut name = String::new();
                i += 1;
                while let Some(c) = at(i).filter(|c| c.is_alphanumeric() || *c == '_') {
                    name.push(c);
                    i += 1;
                }
                if name.is_empty() {
                    return Err(err(start, "empty variable name"));
                }
                Tok::Var(name)
            }
            c if c.is_ascii_digit() || (matches!(c, '-' | '+') && at(i + 1).is_some_and(|n| n.is_ascii_digit())) => {
                let mut num = String::from(c);
                i += 1;
                while let Some(c) = at(i) {
                    let continues_fraction = c == '.' && at(i + 1).is_some_and(|n| n.is_ascii_digit());
                    if c.is_ascii_digit() || continues_fraction {
                        num.push(c);
                        i += 1;
                    } else {
                        break;
                    }
                }
                Tok::Number(num)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(c) = at(i).filter(|c| c.is_alphanumeric() || *c == '_' || *c == ':') {
                    word.push(c);
                    i += 1;
                }
                Tok::Word(word)
            }
            _ => {
                i += 1;
                Tok::Punct(match c {
                    '{' => "{",
                    '}' => "}",
                    '(' => "(",
                    ')' => ")",
                    '.' => ".",
                    '*' => "*",
                    _ => return Err(err(start, &format!("unexpected character {c:?}"))),
                })
            }
        };
        out.push((tok, start));
    }
    Ok(out)
}

/// `<` opens an IRI only if a `>` follows before any whitespace.
fn looks_like_iri(rest: &[(usize, char)]) -> bool {
    rest.first().is_some_and(|&(_, c)| c != '=')
        && rest
            .iter()
            .map(|&(_, c)| c)
            .find(|c| *c == '>' || c.is_whitespace())
            == Some('>')
}

fn parse(text: &str, base: &str) -> Result<Select, SparqlError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        base,
        end: text.len(),
    };
    let s = p.select()?;
    if p.pos < p.toks.len() {
        return Err(p.error("trailing input"));
    }
    Ok(s)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    base: &'a str,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn error(&self, message: &str) -> SparqlError {
        SparqlError::Syntax {
            offset: self.toks.get(self.pos).map_or(self.end, |&(_, o)| o),
            message: message.to_owned(),
        }
    }

    fn next(&mut self) -> Result<Tok, SparqlError> {
        let t = self.peek().cloned().ok_or_else(|| self.error("unexpected end of query"))?;
        self.pos += 1;
        Ok(t)
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x.eq_ignore_ascii_case(w))
    }

    fn eat_word(&mut self, w: &str) -> bool {
        let hit = self.at_word(w);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        let hit = matches!(self.peek(), Some(Tok::Punct(x)) if *x == p);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), SparqlError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{p}'")))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), SparqlError> {
        if self.eat_word(w) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {w}")))
        }
    }

    fn var(&mut self) -> Result<String, SparqlError> {
        match self.next()? {
            Tok::Var(v) => Ok(v),
            _ => {
                self.pos -= 1;
                Err(self.error("expected variable"))
            }
        }
    }

    fn select(&mut self) -> Result<Select, SparqlError> {
        if self.at_word("PREFIX") || self.at_word("BASE") {
            return Err(SparqlError::Unsupported("prologue declarations".into()));
        }
        self.expect_word("SELECT")?;
        let distinct = self.eat_word("DISTINCT");
        let projection = if self.eat_punct("*") {
            Projection::All
        } else if self.eat_punct("(") {
            self.expect_word("COUNT")?;
            self.expect_punct("(")?;
            let count_distinct = self.eat_word("DISTINCT");
            let var = self.var()?;
            self.expect_punct(")")?;
            self.expect_word("AS")?;
            let alias = self.var()?;
            self.expect_punct(")")?;
            Projection::Count {
                var,
                distinct: count_distinct,
                alias,
            }
        } else {
            let mut vars = vec![self.var()?];
            while let Some(Tok::Var(_)) = self.peek() {
                vars.push(self.var()?);
            }
            Projection::Vars(vars)
        };
        self.eat_word("WHERE");
        let group = self.group()?;
        let mut order = Vec::new();
        if self.eat_word("ORDER") {
            self.expect_word("BY")?;
            loop {
                if self.at_word("ASC") || self.at_word("DESC") {
                    let desc = self.at_word("DESC");
                    self.pos += 1;
                    self.expect_punct("(")?;
                    let v = self.var()?;
                    self.expect_punct(")")?;
                    order.push(if desc { OrderKey::Desc(v) } else { OrderKey::Asc(v) });
                } else if let Some(Tok::Var(_)) = self.peek() {
                    order.push(OrderKey::Term(self.var()?));
                } else {
                    break;
                }
            }
            if order.is_empty() {
                return Err(self.error("empty ORDER BY"));
            }
        }
        let mut limit = None;
        if self.eat_word("LIMIT") {
            match self.next()? {
                Tok::Number(n) => limit = Some(n.parse().map_err(|_| self.error("bad LIMIT"))?),
                _ => return Err(self.error("expected number after LIMIT")),
            }
        }
        if self.at_word("OFFSET") || self.at_word("GROUP") || self.at_word("HAVING") {
            return Err(SparqlError::Unsupported("solution modifiers beyond ORDER BY / LIMIT".into()));
        }
        Ok(Select {
            distinct,
            projection,
            group,
            order,
            limit,
        })
    }

    fn group(&mut self) -> Result<Group, SparqlError> {
        self.expect_punct("{")?;
        let mut g = Group::default();
        loop {
            if self.eat_punct("}") {
                return Ok(g);
            }
            if self.eat_punct(".") {
                continue;
            }
            if matches!(self.peek(), Some(Tok::Punct("{"))) {
                if matches!(self.toks.get(self.pos + 1), Some((Tok::Word(w), _)) if w.eq_ignore_ascii_case("SELECT")) {
                    self.pos += 1;
                    let inner = self.select()?;
                    self.expect_punct("}")?;
                    g.elements.push(Element::SubSelect(Box::new(inner)));
                } else {
                    g.elements.push(Element::Group(self.group()?));
                }
            } else if self.eat_word("VALUES") {
                let var = self.var()?;
                self.expect_punct("{")?;
                let mut terms = Vec::new();
                while !self.eat_punct("}") {
                    terms.push(self.constant()?);
                }
                g.elements.push(Element::Values(var, terms));
            } else if self.eat_word("FILTER") {
                g.elements.push(Element::Filter(self.filter()?));
            } else if let Some(Tok::Word(w)) = self.peek() {
                return Err(SparqlError::Unsupported(format!("keyword {w}")));
            } else {
                let s = self.pattern_term()?;
                let p = match self.next()? {
                    Tok::Iri(iri) => self.local(&iri),
                    Tok::Var(_) => return Err(SparqlError::Unsupported("variable predicates".into())),
                    _ => {
                        self.pos -= 1;
                        return Err(self.error("expected predicate IRI"));
                    }
                };
                let o = self.pattern_term()?;
                g.elements.push(Element::Triple(s, p, o));
            }
        }
    }

    fn filter(&mut self) -> Result<Filter, SparqlError> {
        self.expect_punct("(")?;
        let var = self.var()?;
        let op = match self.next()? {
            Tok::Punct("<") => CmpOp::Lt,
            Tok::Punct("<=") => CmpOp::Le,
            Tok::Punct(">") => CmpOp::Gt,
            Tok::Punct(">=") => CmpOp::Ge,
            _ => return Err(SparqlError::Unsupported("filter operator".into())),
        };
        let bound = match self.next()? {
            Tok::Number(n) | Tok::Literal(n) => {
                numeric_key(&n).ok_or_else(|| SparqlError::Unsupported(format!("non-numeric filter operand {n:?}")))?
            }
            _ => return Err(SparqlError::Unsupported("filter operand".into())),
        };
        self.expect_punct(")")?;
        Ok(Filter { var, op, bound })
    }

    fn local(&self, iri: &str) -> String {
        decode_iri_part(iri.strip_prefix(self.base).unwrap_or(iri))
    }

    fn constant(&mut self) -> Result<Term, SparqlError> {
        match self.next()? {
            Tok::Iri(iri) => Ok(Term::Entity(self.local(&iri))),
            Tok::Literal(v) | Tok::Number(v) => Ok(Term::Literal(v)),
            _ => {
                self.pos -= 1;
                Err(self.error("expected constant"))
            }
        }
    }

    fn pattern_term(&mut self) -> Result<Pat, SparqlError> {
        if let Some(Tok::Var(_)) = self.peek() {
            return self.var().map(Pat::Var);
        }
        self.constant().map(Pat::Const)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::kg::Triple;

    const B: &str = "http://ex.org/";

    fn graph() -> KnowledgeGraph {
        KnowledgeGraph::from_triples(
            [
                Triple::new("a", "r", Term::entity("b")),
                Triple::new("a", "r", Term::entity("c")),
                Triple::new("b", "h", Term::literal("2")),
                Triple::new("c", "h", Term::literal("5")),
                Triple::new("d", "h", Term::literal("tall")),
            ],
            HashMap::new(),
        )
    }

    fn run(text: &str) -> Vec<String> {
        let kg = graph();
        let q = SparqlQuery {
            text: text.into(),
            variable: "x".into(),
        };
        InMemoryEngine::new(&kg, B).run(&q).unwrap().values()
    }

    #[test]
    fn basic_pattern() {
        assert_eq!(run("SELECT ?x WHERE { <http://ex.org/a> <http://ex.org/r> ?x . }"), vec!["b", "c"]);
        assert_eq!(run("SELECT ?x { ?x <http://ex.org/r> <http://ex.org/c> }"), vec!["a"]);
    }

    #[test]
    fn filter_order_limit() {
        assert_eq!(run("SELECT ?x { ?x <http://ex.org/h> ?n FILTER(?n < 3) }"), vec!["b"]);
        assert_eq!(
            run("SELECT ?x { ?x <http://ex.org/h> ?n } ORDER BY DESC(?n) ?x LIMIT 1"),
            vec!["c"]
        );
        assert_eq!(
            run("SELECT ?x { ?x <http://ex.org/h> ?n } ORDER BY ASC(?n) LIMIT 1"),
            vec!["b"]
        );
    }

    #[test]
    fn count_and_subselect() {
        assert_eq!(
            run("SELECT (COUNT(DISTINCT ?y) AS ?x) WHERE { <http://ex.org/a> <http://ex.org/r> ?y }"),
            vec!["2"]
        );
        assert_eq!(
            run("SELECT DISTINCT ?x { VALUES ?x { <http://ex.org/b> <http://ex.org/c> } { SELECT ?x { ?x <http://ex.org/h> ?n } ORDER BY DESC(?n) LIMIT 1 } }"),
            vec!["c"]
        );
    }

    #[test]
    fn less_than_is_not_an_iri() {
        assert_eq!(run("SELECT ?x { ?x <http://ex.org/h> ?n FILTER(?n <5) }"), vec!["b"]);
        assert_eq!(run("SELECT ?x { ?x <http://ex.org/h> ?n FILTER(?n<=2) }"), vec!["b"]);
    }

    #[test]
    fn errors() {
        let kg = graph();
        let e = InMemoryEngine::new(&kg, B);
        let q = |t: &str| SparqlQuery {
            text: t.into(),
            variable: "x".into(),
        };
        assert!(matches!(e.run(&q("SELECT ?x WHERE { ?x")), Err(SparqlError::Syntax { .. })));
        assert!(matches!(
            e.run(&q("SELECT ?x { ?x ?p ?o }")),
            Err(SparqlError::Unsupported(_))
        ));
        assert!(matches!(
            e.run(&q("SELECT ?x { ?x <http://ex.org/h> ?n FILTER(?n < \"tall\") }")),
            Err(SparqlError::Unsupported(_))
        ));
    }
}
