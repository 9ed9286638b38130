use serde::{Deserialize, Serialize};

use super::SExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Entity,
    Relation,
    Literal,
}

impl SlotKind {
    pub fn of(leaf: &SExpr) -> Option<SlotKind> {
        match leaf {
            SExpr::Entity(_) => Some(SlotKind::Entity),
            SExpr::Relation(_) => Some(SlotKind::Relation),
            SExpr::Literal { .. } => Some(SlotKind::Literal),
            _ => None,
        }
    }
}

/// Address of a leaf: child indices from the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotRef {
    pub path: Vec<usize>,
    pub kind: SlotKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SlotError {
    #[error("path {0:?} does not resolve to a leaf")]
    InvalidPath(Vec<usize>),
    #[error("slot holds a {found:?}, expected {expected:?}")]
    KindMismatch { expected: SlotKind, found: SlotKind },
    #[error("replacement is not a leaf")]
    NotALeaf,
}

/// All leaves, in pre-order.
pub fn slots(f: &SExpr) -> Vec<SlotRef> {
    fn go(f: &SExpr, path: &mut Vec<usize>, out: &mut Vec<SlotRef>) {
        if let Some(kind) = SlotKind::of(f) {
            out.push(SlotRef {
                path: path.clone(),
                kind,
            });
            return;
        }
        for (i, c) in f.children().into_iter().enumerate() {
            path.push(i);
            go(c, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

pub fn get<'a>(f: &'a SExpr, path: &[usize]) -> Option<&'a SExpr> {
    path.iter()
        .try_fold(f, |node, &i| node.children().get(i).copied())
}

pub(crate) fn get_mut<'a>(f: &'a mut SExpr, path: &[usize]) -> Option<&'a mut SExpr> {
    let mut node = f;
    for &i in path {
        node = node.children_mut().into_iter().nth(i)?;
    }
    Some(node)
}

/// Replaces the leaf at `slot` with `value`, which must be a leaf of the slot's kind.
pub fn substitute(f: &SExpr, slot: &SlotRef, value: SExpr) -> Result<SExpr, SlotError> {
    let new_kind = SlotKind::of(&value).ok_or(SlotError::NotALeaf)?;
    if new_kind != slot.kind {
        return Err(SlotError::KindMismatch {
            expected: slot.kind,
            found: new_kind,
        });
    }
    let mut out = f.clone();
    let target = get_mut(&mut out, &slot.path)
        .ok_or_else(|| SlotError::InvalidPath(slot.path.clone()))?;
    match SlotKind::of(target) {
        None => return Err(SlotError::InvalidPath(slot.path.clone())),
        Some(k) if k != slot.kind => {
            return Err(SlotError::KindMismatch {
                expected: slot.kind,
                found: k,
            })
        }
        Some(_) => *target = value,
    }
    Ok(out)
}
