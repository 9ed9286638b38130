use std::fmt;

use super::{CmpOp, SExpr};
use crate::value::is_decimal;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnbalancedParens,
    UnterminatedToken,
    EmptyInput,
    EmptyList,
    TrailingInput,
    UnknownOperator(String),
    /// A recognised operator this implementation does not handle (e.g. `TC`).
    Unsupported(String),
    Arity {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    Type {
        expected: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the input.
    pub offset: usize,
}

impl ParseError {
    pub fn is_unsupported(&self) -> bool {
        matches!(self.kind, ParseErrorKind::Unsupported(_))
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::UnbalancedParens => write!(f, "unbalanced-parens")?,
            ParseErrorKind::UnterminatedToken => write!(f, "unterminated string or bracket")?,
            ParseErrorKind::EmptyInput => write!(f, "empty input")?,
            ParseErrorKind::EmptyList => write!(f, "empty list")?,
            ParseErrorKind::TrailingInput => write!(f, "trailing input")?,
            ParseErrorKind::UnknownOperator(op) => write!(f, "unknown operator {op:?}")?,
            ParseErrorKind::Unsupported(op) => write!(f, "unsupported operator {op:?}")?,
            ParseErrorKind::Arity { op, expected, found } => {
                write!(f, "{op} takes {expected} argument(s), found {found}")?
            }
            ParseErrorKind::Type { expected } => write!(f, "expected {expected}")?,
        }
        write!(f, " at offset {}", self.offset)
    }
}

fn err<T>(kind: ParseErrorKind, offset: usize) -> Result<T, ParseError> {
    Err(ParseError { kind, offset })
}

#[derive(Debug, Clone, PartialEq)]
enum Atom {
    Bare(String),
    Quoted { value: String, datatype: Option<String> },
    Bracket(String),
}

#[derive(Debug)]
enum Node {
    Atom(Atom, usize),
    List(Vec<Node>, usize),
}

impl Node {
    fn offset(&self) -> usize {
        match self {
            Node::Atom(_, o) | Node::List(_, o) => *o,
        }
    }
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

fn ends_bare(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | '"')
}

impl<'a> Reader<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn bare(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| !ends_bare(c)) {
            self.bump();
        }
        self.src[start..self.pos].to_owned()
    }

    fn node(&mut self) -> Result<Node, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => err(ParseErrorKind::UnbalancedParens, self.src.len()),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        None => return err(ParseErrorKind::UnbalancedParens, self.src.len()),
                        Some(')') => {
                            self.bump();
                            return Ok(Node::List(items, start));
                        }
                        Some(_) => items.push(self.node()?),
                    }
                }
            }
            Some(')') => err(ParseErrorKind::UnbalancedParens, start),
            Some('"') => {
                self.bump();
                let mut value = String::new();
                loop {
                    match self.bump() {
                        None => return err(ParseErrorKind::UnterminatedToken, start),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('n') => value.push('\n'),
                            Some('t') => value.push('\t'),
                            Some('r') => value.push('\r'),
                            Some(c) => value.push(c),
                            None => return err(ParseErrorKind::UnterminatedToken, start),
                        },
                        Some(c) => value.push(c),
                    }
                }
                let mut datatype = None;
                if self.src[self.pos..].starts_with("^^") {
                    self.pos += 2;
                    datatype = Some(self.bare());
                } else if self.peek() == Some('@') {
                    // language tags carry no meaning here
                    self.bare();
                }
                Ok(Node::Atom(Atom::Quoted { value, datatype }, start))
            }
            Some('[') => {
                self.bump();
                let mut text = String::new();
                loop {
                    match self.bump() {
                        None => return err(ParseErrorKind::UnterminatedToken, start),
                        Some(']') => break,
                        Some('\\') => match self.bump() {
                            Some(c) => text.push(c),
                            None => return err(ParseErrorKind::UnterminatedToken, start),
                        },
                        Some(c) => text.push(c),
                    }
                }
                let text = text.strip_prefix(' ').unwrap_or(&text);
                let text = text.strip_suffix(' ').unwrap_or(text);
                Ok(Node::Atom(Atom::Bracket(text.to_owned()), start))
            }
            Some(']') => err(ParseErrorKind::UnbalancedParens, start),
            Some(_) => Ok(Node::Atom(Atom::Bare(self.bare()), start)),
        }
    }
}

/// Parses an S-expression logical form.
pub fn parse(text: &str) -> Result<SExpr, ParseError> {
    let mut r = Reader { src: text, pos: 0 };
    r.skip_ws();
    if r.peek().is_none() {
        return err(ParseErrorKind::EmptyInput, 0);
    }
    let node = r.node()?;
    r.skip_ws();
    if r.pos < text.len() {
        let kind = if r.peek() == Some(')') {
            ParseErrorKind::UnbalancedParens
        } else {
            ParseErrorKind::TrailingInput
        };
        return err(kind, r.pos);
    }
    root(node)
}

#[derive(Clone, Copy)]
enum Op {
    Join,
    Reverse,
    And,
    Count,
    Argmax,
    Argmin,
    Cmp(CmpOp),
}

impl Op {
    fn name(self) -> &'static str {
        match self {
            Op::Join => "JOIN",
            Op::Reverse => "R",
            Op::And => "AND",
            Op::Count => "COUNT",
            Op::Argmax => "ARGMAX",
            Op::Argmin => "ARGMIN",
            Op::Cmp(c) => c.keyword(),
        }
    }

    fn arity(self) -> usize {
        match self {
            Op::Reverse | Op::Count => 1,
            _ => 2,
        }
    }
}

const UNSUPPORTED: &[&str] = &["TC", "CONS", "OR", "NOT"];

fn operator(items: &[Node], offset: usize) -> Result<(Op, &[Node]), ParseError> {
    let Some((head, args)) = items.split_first() else {
        return err(ParseErrorKind::EmptyList, offset);
    };
    let Node::Atom(Atom::Bare(name), at) = head else {
        return err(ParseErrorKind::UnknownOperator(String::new()), head.offset());
    };
    let op = match name.to_ascii_uppercase().as_str() {
        "JOIN" => Op::Join,
        "R" => Op::Reverse,
        "AND" => Op::And,
        "COUNT" => Op::Count,
        "ARGMAX" => Op::Argmax,
        "ARGMIN" => Op::Argmin,
        "LT" => Op::Cmp(CmpOp::Lt),
        "LE" => Op::Cmp(CmpOp::Le),
        "GT" => Op::Cmp(CmpOp::Gt),
        "GE" => Op::Cmp(CmpOp::Ge),
        up if UNSUPPORTED.contains(&up) => {
            return err(ParseErrorKind::Unsupported(name.clone()), *at)
        }
        _ => return err(ParseErrorKind::UnknownOperator(name.clone()), *at),
    };
    if args.len() != op.arity() {
        return err(
            ParseErrorKind::Arity {
                op: op.name(),
                expected: op.arity(),
                found: args.len(),
            },
            offset,
        );
    }
    Ok((op, args))
}

fn root(node: Node) -> Result<SExpr, ParseError> {
    if let Node::List(items, offset) = &node {
        if let (Op::Count, [arg]) = operator(items, *offset)? {
            return Ok(SExpr::Count(Box::new(set(arg)?)));
        }
    }
    set(&node)
}

fn set(node: &Node) -> Result<SExpr, ParseError> {
    match node {
        Node::Atom(atom, _) => Ok(match atom {
            Atom::Bracket(text) => SExpr::Entity(text.clone()),
            Atom::Quoted { value, datatype } => SExpr::Literal {
                value: value.clone(),
                datatype: datatype.clone(),
            },
            Atom::Bare(tok) => bare_value(tok),
        }),
        Node::List(items, offset) => {
            let (op, args) = operator(items, *offset)?;
            Ok(match (op, args) {
                (Op::Join, [r, s]) => SExpr::join(rel(r)?, set(s)?),
                (Op::And, [a, b]) => SExpr::and(set(a)?, set(b)?),
                (Op::Argmax, [s, r]) => SExpr::argmax(set(s)?, rel(r)?),
                (Op::Argmin, [s, r]) => SExpr::argmin(set(s)?, rel(r)?),
                (Op::Cmp(c), [r, l]) => SExpr::compare(c, rel(r)?, literal(l)?),
                (Op::Count, _) => {
                    return err(
                        ParseErrorKind::Type {
                            expected: "set expression (COUNT is only allowed at the top level)",
                        },
                        *offset,
                    )
                }
                (Op::Reverse, _) => {
                    return err(
                        ParseErrorKind::Type {
                            expected: "set expression, found relation",
                        },
                        *offset,
                    )
                }
                _ => unreachable!("arity checked"),
            })
        }
    }
}

fn bare_value(tok: &str) -> SExpr {
    if let Some((value, dt)) = tok.split_once("^^") {
        SExpr::Literal {
            value: value.to_owned(),
            datatype: Some(dt.to_owned()),
        }
    } else if is_decimal(tok) {
        SExpr::literal(tok)
    } else {
        SExpr::Entity(tok.to_owned())
    }
}

fn rel(node: &Node) -> Result<SExpr, ParseError> {
    match node {
        Node::Atom(Atom::Bare(tok), _) => Ok(SExpr::Relation(tok.clone())),
        Node::Atom(Atom::Bracket(t), _) if t.is_empty() => Ok(SExpr::Relation(String::new())),
        Node::Atom(_, offset) => err(ParseErrorKind::Type { expected: "relation" }, *offset),
        Node::List(items, offset) => match operator(items, *offset)? {
            (Op::Reverse, [inner]) => Ok(SExpr::reverse(rel(inner)?)),
            _ => err(ParseErrorKind::Type { expected: "relation" }, *offset),
        },
    }
}

fn literal(node: &Node) -> Result<SExpr, ParseError> {
    match node {
        Node::Atom(Atom::Bracket(t), _) if t.is_empty() => Ok(SExpr::literal("")),
        Node::Atom(Atom::Quoted { value, datatype }, _) => Ok(SExpr::Literal {
            value: value.clone(),
            datatype: datatype.clone(),
        }),
        Node::Atom(Atom::Bare(tok), offset) => match bare_value(tok) {
            lit @ SExpr::Literal { .. } => Ok(lit),
            _ => err(ParseErrorKind::Type { expected: "literal" }, *offset),
        },
        other => err(ParseErrorKind::Type { expected: "literal" }, other.offset()),
    }
}
