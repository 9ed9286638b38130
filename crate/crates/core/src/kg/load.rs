use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{KgError, KnowledgeGraph, Term, Triple};

fn read(path: &Path) -> Result<String, KgError> {
    fs::read_to_string(path).map_err(|source| KgError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses `subject<TAB>relation<TAB>object<TAB>kind` records.
///
/// `kind` is `e` for entity objects and `l` for literals. Blank lines and
/// lines starting with `#` are ignored.
pub fn parse_triples(text: &str) -> Result<Vec<Triple>, KgError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let [subject, relation, object, kind] = fields[..] else {
            return Err(KgError::Malformed {
                line,
                reason: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        };
        if subject.is_empty() {
            return Err(KgError::Malformed {
                line,
                reason: "empty subject".into(),
            });
        }
        if relation.is_empty() {
            return Err(KgError::Malformed {
                line,
                reason: "empty relation".into(),
            });
        }
        let object = match kind {
            "e" if object.is_empty() => {
                return Err(KgError::Malformed {
                    line,
                    reason: "empty entity object".into(),
                })
            }
            "e" => Term::Entity(object.to_owned()),
            "l" => Term::Literal(object.to_owned()),
            other => {
                return Err(KgError::Malformed {
                    line,
                    reason: format!("unknown object kind {other:?} (expected e or l)"),
                })
            }
        };
        out.push(Triple::new(subject, relation, object));
    }
    Ok(out)
}

/// Parses `entity_id<TAB>label` records. Repeating an identical label is
/// allowed; a different label for the same id is an error.
pub fn parse_labels(text: &str) -> Result<HashMap<String, String>, KgError> {
    let mut labels: HashMap<String, String> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let Some((id, label)) = raw.split_once('\t') else {
            return Err(KgError::Malformed {
                line,
                reason: "expected entity_id<TAB>label".into(),
            });
        };
        if id.is_empty() {
            return Err(KgError::Malformed {
                line,
                reason: "empty entity id".into(),
            });
        }
        match labels.get(id) {
            Some(prev) if prev != label => {
                return Err(KgError::ConflictingLabel {
                    line,
                    id: id.to_owned(),
                    first: prev.clone(),
                    second: label.to_owned(),
                })
            }
            Some(_) => {}
            None => {
                labels.insert(id.to_owned(), label.to_owned());
            }
        }
    }
    Ok(labels)
}

pub fn load_labels(path: &Path) -> Result<HashMap<String, String>, KgError> {
    parse_labels(&read(path)?)
}

pub fn load_kg(triples_path: &Path, labels_path: Option<&Path>) -> Result<KnowledgeGraph, KgError> {
    let triples = parse_triples(&read(triples_path)?)?;
    let labels = match labels_path {
        Some(p) => load_labels(p)?,
        None => HashMap::new(),
    };
    let kg = KnowledgeGraph::from_triples(triples, labels);
    tracing::info!(triples = kg.len(), labels = kg.labels().len(), "loaded knowledge graph");
    Ok(kg)
}
