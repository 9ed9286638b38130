use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use super::embedding::EmbeddingIndex;
use crate::kg::KnowledgeGraph;
use crate::Score;

/// Character trigrams of `" " + lowercase(s) + " "`.
pub fn trigrams(s: &str) -> BTreeSet<String> {
    let padded: Vec<char> = format!(" {} ", s.to_lowercase()).chars().collect();
    padded.windows(3).map(|w| w.iter().collect()).collect()
}

/// Jaccard similarity of the two strings' trigram sets; 0 when both are empty.
pub fn trigram_jaccard<S: Score>(a: &str, b: &str) -> S {
    let (ta, tb) = (trigrams(a), trigrams(b));
    let inter = ta.intersection(&tb).count();
    let union = ta.len() + tb.len() - inter;
    if union == 0 {
        S::zero()
    } else {
        S::of_count(inter) / S::of_count(union)
    }
}

/// Inverted trigram index over `(id, label)` pairs.
#[derive(Debug, Clone, Default)]
pub struct TrigramIndex {
    ids: Vec<String>,
    sizes: Vec<usize>,
    postings: HashMap<String, Vec<u32>>,
    /// Distinct ids in lexicographic order.
    sorted_ids: Vec<String>,
}

impl TrigramIndex {
    pub fn new(corpus: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut idx = TrigramIndex::default();
        for (doc, (id, label)) in corpus.into_iter().enumerate() {
            let grams = trigrams(&label);
            idx.sizes.push(grams.len());
            for g in grams {
                idx.postings.entry(g).or_default().push(doc as u32);
            }
            idx.ids.push(id);
        }
        let distinct: BTreeSet<&String> = idx.ids.iter().collect();
        idx.sorted_ids = distinct.into_iter().cloned().collect();
        idx
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn scores<S: Score>(&self, query: &str) -> HashMap<&str, S> {
        let q = trigrams(query);
        let mut overlap: HashMap<u32, usize> = HashMap::new();
        for g in &q {
            for &doc in self.postings.get(g).map_or(&[][..], Vec::as_slice) {
                *overlap.entry(doc).or_default() += 1;
            }
        }
        let mut best: HashMap<&str, S> = HashMap::new();
        for (doc, inter) in overlap {
            let union = q.len() + self.sizes[doc as usize] - inter;
            let s = S::of_count(inter) / S::of_count(union);
            let e = best.entry(self.ids[doc as usize].as_str()).or_insert(s);
            if s > *e {
                *e = s;
            }
        }
        if let Ok(i) = self.sorted_ids.binary_search_by(|id| id.as_str().cmp(query)) {
            best.insert(self.sorted_ids[i].as_str(), S::one());
        }
        best
    }
}

/// Surface form → entity ids with weights, consulted alongside similarity.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    by_surface: HashMap<String, Vec<(String, f64)>>,
}

#[derive(Debug, thiserror::Error)]
pub enum AliasError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected surface<TAB>id<TAB>weight")]
    Malformed { path: String, line: usize },
}

impl AliasTable {
    /// Parses `surface<TAB>entity_id<TAB>weight` lines.
    pub fn parse(text: &str) -> Result<Self, usize> {
        let mut by_surface: HashMap<String, Vec<(String, f64)>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(surface), Some(id), Some(w), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
                return Err(i + 1);
            };
            let w: f64 = w.trim().parse().map_err(|_| i + 1)?;
            if !w.is_finite() || w < 0.0 {
                return Err(i + 1);
            }
            by_surface
                .entry(surface.trim().to_lowercase())
                .or_default()
                .push((id.trim().to_owned(), w));
        }
        Ok(Self { by_surface })
    }

    pub fn load(path: &Path) -> Result<Self, AliasError> {
        let text = fs::read_to_string(path).map_err(|source| AliasError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|line| AliasError::Malformed {
            path: path.display().to_string(),
            line,
        })
    }

    /// Ids for `surface`, each scored by its weight relative to the heaviest.
    fn lookup<S: Score>(&self, surface: &str) -> Vec<(&str, S)> {
        let Some(hits) = self.by_surface.get(&surface.trim().to_lowercase()) else {
            return Vec::new();
        };
        let max = hits.iter().map(|h| h.1).fold(0.0, f64::max);
        hits.iter()
            .map(|(id, w)| (id.as_str(), if max > 0.0 { S::of(w / max) } else { S::one() }))
            .collect()
    }
}

pub enum SimilarityBackend<S> {
    Lexical(TrigramIndex),
    Embedding(EmbeddingIndex<S>),
}

/// Retrieval over entity labels or relation ids.
pub struct SimilarityIndex<S = f64> {
    backend: SimilarityBackend<S>,
    aliases: Option<AliasTable>,
}

impl<S: Score> SimilarityIndex<S> {
    pub fn new(backend: SimilarityBackend<S>) -> Self {
        Self { backend, aliases: None }
    }

    pub fn lexical(corpus: impl IntoIterator<Item = (String, String)>) -> Self {
        Self::new(SimilarityBackend::Lexical(TrigramIndex::new(corpus)))
    }

    /// Every entity of the graph under its label (or its id when unlabeled).
    pub fn entities(kg: &KnowledgeGraph) -> Self {
        Self::lexical(kg.entities().into_iter().map(|id| (id.to_owned(), kg.label_or_id(id).to_owned())))
    }

    /// Every relation of the graph, matched on its id.
    pub fn relations(kg: &KnowledgeGraph) -> Self {
        Self::lexical(kg.relations().map(|r| (r.to_owned(), r.to_owned())))
    }

    pub fn with_aliases(mut self, aliases: AliasTable) -> Self {
        self.aliases = Some(aliases);
        self
    }

    /// Up to `k` ids by descending score, ties by id. Scores lie in [0, 1].
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<(String, S)> {
        let mut best: HashMap<String, S> = match &self.backend {
            SimilarityBackend::Lexical(t) => t.scores::<S>(query).into_iter().map(|(id, s)| (id.to_owned(), s)).collect(),
            SimilarityBackend::Embedding(e) => e.scores(query),
        };
        if let Some(aliases) = &self.aliases {
            for (id, s) in aliases.lookup::<S>(query) {
                let e = best.entry(id.to_owned()).or_insert(s);
                if s > *e {
                    *e = s;
                }
            }
        }
        let mut ranked: Vec<(String, S)> = best.into_iter().collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores").then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k);
        if ranked.len() < k {
            // pad with zero-score ids so that k beyond the overlap still covers the corpus
            if let SimilarityBackend::Lexical(t) = &self.backend {
                let have: BTreeSet<String> = ranked.iter().map(|r| r.0.clone()).collect();
                let fill = t
                    .sorted_ids
                    .iter()
                    .filter(|id| !have.contains(*id))
                    .take(k - ranked.len())
                    .map(|id| (id.clone(), S::zero()))
                    .collect::<Vec<_>>();
                ranked.extend(fill);
            }
        }
        ranked
    }
}

pub fn retrieve_similar<S: Score>(query: &str, k: usize, index: &SimilarityIndex<S>) -> Vec<(String, S)> {
    index.retrieve(query, k)
}
