use std::fmt;

use serde::{Deserialize, Serialize};

use super::SExpr;

/// Structure-only rendering of a logical form: every entity, literal and
/// relation is printed as `[]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Skeleton(String);

impl Skeleton {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Parses the skeleton text back into a tree of placeholders.
    pub fn template(&self) -> SExpr {
        super::parse(&self.0).expect("skeleton text is always parseable")
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn skeleton(f: &SExpr) -> Skeleton {
    let mut out = String::new();
    write(f, &mut out);
    Skeleton(out)
}

fn write(f: &SExpr, out: &mut String) {
    if f.is_leaf() {
        out.push_str("[]");
        return;
    }
    out.push('(');
    out.push_str(f.operator());
    for c in f.children() {
        out.push(' ');
        write(c, out);
    }
    out.push(')');
}
