//! Dataset loading, answer metrics and reports.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};
use crate::lf::{parse, SExpr};
use crate::refine::{RefinementResult, Stage};
use crate::Score;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerRef {
    Labeled { id: String, label: Option<String> },
    Bare(String),
}

impl AnswerRef {
    pub fn id(&self) -> &str {
        match self {
            AnswerRef::Labeled { id, .. } | AnswerRef::Bare(id) => id,
        }
    }
}

#[derive(Debug, Deserialize)]
struct DatasetRecord {
    qid: String,
    question: String,
    #[serde(default)]
    s_expression: Option<String>,
    #[serde(default)]
    answers: Vec<AnswerRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalItem {
    pub qid: String,
    pub question: String,
    pub gold_form: Option<SExpr>,
    /// Gold form text that did not parse, kept for reference.
    pub raw_form: Option<String>,
    /// True when the gold form uses an operator outside the grammar (e.g. `TC`).
    pub unsupported: bool,
    pub answers: Vec<AnswerRef>,
}

impl EvalItem {
    pub fn gold(&self) -> BTreeSet<String> {
        self.answers.iter().map(|a| a.id().to_owned()).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    File(#[from] JsonlError),
    #[error("duplicate qid {0:?}")]
    DuplicateQid(String),
    #[error("result for unknown qid {0:?}")]
    UnknownQid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Reads `{"qid", "question", "s_expression", "answers": [{"id", "label"}]}`
/// lines. Gold forms that fail to parse are flagged and the item is kept.
pub fn load_dataset(path: &Path) -> Result<Vec<EvalItem>, EvalError> {
    let mut seen = HashSet::new();
    let mut items = Vec::new();
    for (line, rec) in jsonl::read::<DatasetRecord>(path)? {
        if !seen.insert(rec.qid.clone()) {
            return Err(EvalError::DuplicateQid(rec.qid));
        }
        let text = rec.s_expression.filter(|s| !s.trim().is_empty() && s.trim() != "null");
        let (gold_form, raw_form, unsupported) = match text.as_deref().map(parse) {
            None => (None, None, false),
            Some(Ok(f)) => (Some(f), None, false),
            Some(Err(e)) => {
                tracing::warn!(qid = %rec.qid, line, error = %e, "gold form not usable");
                (None, text, e.is_unsupported())
            }
        };
        items.push(EvalItem {
            qid: rec.qid,
            question: rec.question,
            gold_form,
            raw_form,
            unsupported,
            answers: rec.answers,
        });
    }
    Ok(items)
}

/// Harmonic mean of precision and recall. Both sets empty scores 1.
pub fn f1<S: Score>(pred: &BTreeSet<String>, gold: &BTreeSet<String>) -> S {
    if pred.is_empty() && gold.is_empty() {
        return S::one();
    }
    let tp = pred.intersection(gold).count();
    if tp == 0 {
        return S::zero();
    }
    // 2PR/(P+R) rewritten as one division, so exact fractions stay exact
    S::of_count(2 * tp) / S::of_count(pred.len() + gold.len())
}

/// 1 iff the first predicted answer is gold.
pub fn hits_at_1<S: Score>(ranked: &[String], gold: &BTreeSet<String>) -> S {
    match ranked.first() {
        Some(a) if gold.contains(a) => S::one(),
        _ => S::zero(),
    }
}

/// 1 iff the sets are equal.
pub fn accuracy<S: Score>(pred: &BTreeSet<String>, gold: &BTreeSet<String>) -> S {
    if pred == gold {
        S::one()
    } else {
        S::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Score F1 and accuracy as 1 when prediction and gold are both empty.
    pub both_empty_agree: bool,
    /// Leave items with empty gold out of the Hits@1 mean.
    pub skip_empty_gold_for_hits: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            both_empty_agree: true,
            skip_empty_gold_for_hits: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemMetrics<S> {
    pub qid: String,
    pub f1: S,
    pub hit1: S,
    pub acc: S,
    pub stage: Stage,
    pub predicted: usize,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport<S> {
    pub items: Vec<ItemMetrics<S>>,
    pub f1: S,
    pub hits_at_1: S,
    pub accuracy: S,
    pub count: usize,
    pub empty_gold: usize,
    /// Items without a result, scored as failed.
    pub missing: usize,
    pub stages: BTreeMap<String, usize>,
}

fn mean<S: Score>(xs: impl Iterator<Item = S>) -> S {
    let (sum, n) = xs.fold((S::zero(), 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        S::zero()
    } else {
        sum / S::of_count(n)
    }
}

pub fn score_item<S: Score>(qid: &str, result: &RefinementResult, gold: &BTreeSet<String>, cfg: &MetricsConfig) -> ItemMetrics<S> {
    let ranked = result.answers.values();
    let pred: BTreeSet<String> = ranked.iter().cloned().collect();
    let (mut f, mut a) = (f1::<S>(&pred, gold), accuracy::<S>(&pred, gold));
    if !cfg.both_empty_agree && pred.is_empty() && gold.is_empty() {
        (f, a) = (S::zero(), S::zero());
    }
    ItemMetrics {
        qid: qid.to_owned(),
        f1: f,
        hit1: hits_at_1(&ranked, gold),
        acc: a,
        stage: result.stage,
        predicted: pred.len(),
        gold: gold.len(),
    }
}

/// Scores every dataset item; items with no result count as failed.
pub fn evaluate<S: Score>(
    results: &[(String, RefinementResult)],
    dataset: &[EvalItem],
    cfg: &MetricsConfig,
) -> Result<MetricsReport<S>, EvalError> {
    let known: HashSet<&str> = dataset.iter().map(|i| i.qid.as_str()).collect();
    let mut by_qid: HashMap<&str, &RefinementResult> = HashMap::new();
    for (qid, r) in results {
        if !known.contains(qid.as_str()) {
            return Err(EvalError::UnknownQid(qid.clone()));
        }
        if by_qid.insert(qid, r).is_some() {
            return Err(EvalError::DuplicateQid(qid.clone()));
        }
    }
    let failed = RefinementResult::failed();
    let mut missing = 0;
    let items: Vec<ItemMetrics<S>> = dataset
        .iter()
        .map(|item| {
            let r = by_qid.get(item.qid.as_str()).copied().unwrap_or_else(|| {
                missing += 1;
                &failed
            });
            score_item(&item.qid, r, &item.gold(), cfg)
        })
        .collect();
    let mut stages = BTreeMap::new();
    for i in &items {
        *stages.entry(i.stage.as_str().to_owned()).or_default() += 1;
    }
    let hits = items
        .iter()
        .filter(|i| !(cfg.skip_empty_gold_for_hits && i.gold == 0))
        .map(|i| i.hit1);
    Ok(MetricsReport {
        f1: mean(items.iter().map(|i| i.f1)),
        hits_at_1: mean(hits),
        accuracy: mean(items.iter().map(|i| i.acc)),
        count: items.len(),
        empty_gold: items.iter().filter(|i| i.gold == 0).count(),
        missing,
        stages,
        items,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultRecord {
    qid: String,
    #[serde(flatten)]
    result: RefinementResult,
}

pub fn write_results(path: &Path, results: &[(String, RefinementResult)]) -> Result<(), EvalError> {
    let records = results.iter().map(|(qid, r)| ResultRecord {
        qid: qid.clone(),
        result: r.clone(),
    });
    Ok(jsonl::write(path, records)?)
}

pub fn read_results(path: &Path) -> Result<Vec<(String, RefinementResult)>, EvalError> {
    Ok(jsonl::read::<ResultRecord>(path)?
        .into_iter()
        .map(|(_, r)| (r.qid, r.result))
        .collect())
}

/// Aligned-column summary followed by the stage histogram.
pub fn render_table<S: Score>(report: &MetricsReport<S>) -> String {
    let mut rows: Vec<(String, String)> = vec![
        ("items".into(), report.count.to_string()),
        ("F1".into(), format!("{:.4}", report.f1)),
        ("Hits@1".into(), format!("{:.4}", report.hits_at_1)),
        ("Acc".into(), format!("{:.4}", report.accuracy)),
        ("empty gold".into(), report.empty_gold.to_string()),
        ("missing".into(), report.missing.to_string()),
    ];
    rows.extend(report.stages.iter().map(|(s, n)| (format!("stage {s}"), n.to_string())));
    let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let v = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, val) in rows {
        writeln!(out, "{k:<w$}  {val:>v$}").expect("writing to a String");
    }
    out
}

/// Writes `<stem>.json` and `<stem>.txt` next to each other.
pub fn write_report<S: Score + Serialize>(report: &MetricsReport<S>, json_path: &Path, text_path: &Path) -> Result<(), EvalError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| EvalError::Io { path, source }
    };
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(json_path, json + "\n").map_err(io(json_path))?;
    fs::write(text_path, render_table(report)).map_err(io(text_path))
}
