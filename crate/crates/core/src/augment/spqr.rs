//! Semantic-preserving question rewriting.
//!
//! Each selected training question is paraphrased `rw` times; every
//! paraphrase keeps the original logical form untouched.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{normalize_question, QALPair, Source};
use crate::lf::{skeleton, Skeleton};
use crate::llm::{complete, list_items, Bindings, GenerationRequest, LlmBackend, LlmError, PromptTemplate};
use crate::parallel::bounded_map;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewrites {
    pub paraphrases: Vec<String>,
    /// Lines removed as duplicates, copies of the original, or by the length guard.
    pub dropped: usize,
}

fn within_length_ratio(paraphrase: &str, original: &str) -> bool {
    let (p, o) = (paraphrase.chars().count() as f64, original.chars().count() as f64);
    o == 0.0 || (0.3 * o..=3.0 * o).contains(&p)
}

pub fn rewrite_question(
    question: &str,
    rw: usize,
    prompt: &PromptTemplate,
    llm: &dyn LlmBackend,
    length_guard: bool,
) -> Result<Rewrites, LlmError> {
    let bindings = Bindings::from([
        ("question".to_owned(), question.to_owned()),
        ("rw".to_owned(), rw.to_string()),
    ]);
    let req = GenerationRequest::from_template(prompt, bindings)?;
    let text = complete(&req, llm)?.text;
    // every line is read so that surplus lines can stand in for duplicates
    let items = list_items(&text)?;
    let mut seen = BTreeSet::from([normalize_question(question)]);
    let mut paraphrases = Vec::new();
    let mut dropped = 0;
    for line in items {
        let fresh = seen.insert(normalize_question(&line));
        if !fresh || (length_guard && !within_length_ratio(&line, question)) {
            dropped += 1;
            continue;
        }
        if paraphrases.len() < rw {
            paraphrases.push(line);
        }
    }
    if paraphrases.len() < rw {
        tracing::warn!(question, rw, got = paraphrases.len(), "fewer distinct paraphrases than requested");
    }
    Ok(Rewrites { paraphrases, dropped })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpqrConfig {
    pub rw: usize,
    /// Only rewrite questions whose skeleton is in this set.
    pub pattern_filter: Option<BTreeSet<Skeleton>>,
    pub length_guard: bool,
    pub concurrency: usize,
}

impl Default for SpqrConfig {
    fn default() -> Self {
        Self {
            rw: 1,
            pattern_filter: None,
            length_guard: false,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SpqrReport {
    pub items: usize,
    pub selected: usize,
    pub failed: usize,
    pub dropped: usize,
    pub pairs: usize,
    pub failures: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct SpqrOutput {
    pub pairs: Vec<QALPair>,
    pub report: SpqrReport,
}

/// The `r` most frequent skeletons among the training forms.
pub fn top_skeletons(training: &[QALPair], r: usize) -> BTreeSet<Skeleton> {
    super::arpe::rank_skeletons(training)
        .into_iter()
        .take(r)
        .map(|(s, _)| s)
        .collect()
}

/// Output is ordered by original qid (items without one use their position).
pub fn run_spqr(training: &[QALPair], config: &SpqrConfig, prompt: &PromptTemplate, llm: &dyn LlmBackend) -> SpqrOutput {
    let selected: Vec<(String, &QALPair)> = training
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            config
                .pattern_filter
                .as_ref()
                .is_none_or(|f| f.contains(&skeleton(&p.logical_form)))
        })
        .map(|(i, p)| (p.qid().map_or_else(|| format!("#{i:08}"), str::to_owned), p))
        .collect();

    let results = bounded_map(&selected, config.concurrency, |(_, p)| {
        rewrite_question(&p.question, config.rw, prompt, llm, config.length_guard)
    });

    let mut report = SpqrReport {
        items: training.len(),
        selected: selected.len(),
        ..SpqrReport::default()
    };
    let mut keyed: Vec<(&str, usize, QALPair)> = Vec::new();
    for ((qid, src), res) in selected.iter().zip(results) {
        match res {
            Ok(rw) => {
                report.dropped += rw.dropped;
                for (i, q) in rw.paraphrases.into_iter().enumerate() {
                    let pair = QALPair::new(q, src.logical_form.clone(), Source::Spqr)
                        .with_meta("qid", qid.as_str())
                        .with_meta("rewrite", i.to_string());
                    keyed.push((qid, i, pair));
                }
            }
            Err(e) => {
                tracing::warn!(qid = %qid, error = %e, "skipping question");
                report.failed += 1;
                report.failures.insert(qid.clone(), e.to_string());
            }
        }
    }
    keyed.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let pairs: Vec<QALPair> = keyed.into_iter().map(|(_, _, p)| p).collect();
    report.pairs = pairs.len();
    SpqrOutput { pairs, report }
}
