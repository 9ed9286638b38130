use std::collections::HashMap;

use super::SExpr;
use crate::kg::KnowledgeGraph;

/// Replaces entity ids with their labels; unlabeled ids are kept.
pub fn labelize(f: &SExpr, labels: &HashMap<String, String>) -> SExpr {
    map_entities(f, &mut |e| labels.get(e).cloned().unwrap_or_else(|| e.to_owned()))
}

fn map_entities(f: &SExpr, g: &mut impl FnMut(&str) -> String) -> SExpr {
    match f {
        SExpr::Entity(e) => SExpr::Entity(g(e)),
        _ => {
            let mut out = f.clone();
            for (dst, src) in out.children_mut().into_iter().zip(f.children()) {
                *dst = map_entities(src, g);
            }
            out
        }
    }
}

/// Label → candidate ids, most popular (highest triple degree) first.
#[derive(Debug, Clone, Default)]
pub struct LabelIndex {
    by_label: HashMap<String, Vec<(String, usize)>>,
}

impl LabelIndex {
    pub fn from_kg(kg: &KnowledgeGraph) -> Self {
        Self::from_entries(
            kg.labels()
                .iter()
                .map(|(id, label)| (id.clone(), label.clone(), kg.degree(id))),
        )
    }

    /// Builds from `(id, label, popularity)` triples.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, String, usize)>) -> Self {
        let mut by_label: HashMap<String, Vec<(String, usize)>> = HashMap::new();
        for (id, label, pop) in entries {
            by_label.entry(label).or_default().push((id, pop));
        }
        for ids in by_label.values_mut() {
            ids.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            ids.dedup_by(|a, b| a.0 == b.0);
        }
        Self { by_label }
    }

    pub fn ids(&self, label: &str) -> &[(String, usize)] {
        self.by_label.get(label).map_or(&[], Vec::as_slice)
    }
}

/// One form per consistent assignment of ids to the entity labels in `f`,
/// ranked by total popularity (ties: earlier options first). Entity texts
/// that are not known labels are left as they are.
pub fn delabelize(f: &SExpr, index: &LabelIndex, limit: usize) -> Vec<SExpr> {
    const ENUMERATION_CAP: usize = 10_000;

    let options: Vec<Vec<(String, usize)>> = f
        .entities()
        .into_iter()
        .map(|text| match index.ids(text) {
            [] => vec![(text.to_owned(), 0)],
            ids => ids.to_vec(),
        })
        .collect();

    let mut combos: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut cursor = vec![0usize; options.len()];
    loop {
        let pop = cursor.iter().zip(&options).map(|(&i, o)| o[i].1).sum();
        combos.push((pop, cursor.clone()));
        if combos.len() >= ENUMERATION_CAP {
            break;
        }
        // odometer increment, last slot fastest
        let mut exhausted = true;
        for pos in (0..options.len()).rev() {
            cursor[pos] += 1;
            if cursor[pos] < options[pos].len() {
                exhausted = false;
                break;
            }
            cursor[pos] = 0;
        }
        if exhausted {
            break;
        }
    }
    combos.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    combos.truncate(limit);

    combos
        .into_iter()
        .map(|(_, choice)| {
            let mut k = 0;
            map_entities(f, &mut |_| {
                let id = options[k][choice[k]].0.clone();
                k += 1;
                id
            })
        })
        .collect()
}
