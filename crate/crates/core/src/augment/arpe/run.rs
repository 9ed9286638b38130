use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{
    build_logical_form, explore_paths_with, group_by_pattern, reject_reason, validate, Direction, ExploreConfig,
    ExploredPath, ReasoningPattern, Rejection, ANSWER_NODE, DEFAULT_FAN_OUT,
};
use crate::augment::{normalize_question, QALPair, Source};
use crate::kg::{KnowledgeGraph, Term};
use crate::lf::SExpr;
use crate::llm::{complete, humanize_relation, list_items, Bindings, GenerationRequest, LlmBackend, LlmError, PromptTemplate};
use crate::parallel::bounded_map;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArpeConfig {
    /// Number of top patterns to explore.
    pub patterns: usize,
    pub paths_per_answer: usize,
    pub cap_per_pattern: usize,
    pub fan_out: usize,
    pub seed: u64,
    pub concurrency: usize,
}

impl Default for ArpeConfig {
    fn default() -> Self {
        Self {
            patterns: 5,
            paths_per_answer: 10,
            cap_per_pattern: 500,
            fan_out: DEFAULT_FAN_OUT,
            seed: 0,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PatternReport {
    pub rank: usize,
    pub skeleton: String,
    pub members: usize,
    pub answers: usize,
    /// Answer ids absent from the graph.
    pub missing_answers: usize,
    pub paths: usize,
    pub validated: usize,
    /// Questions returned by the model.
    pub raw: usize,
    /// Questions that passed the quality filter.
    pub filtered: usize,
    pub rejected: BTreeMap<String, usize>,
    pub duplicates: usize,
    pub emitted: usize,
    pub failures: usize,
    /// Why the whole pattern was skipped, if it was.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ArpeReport {
    pub patterns: Vec<PatternReport>,
    pub raw: usize,
    pub validated: usize,
    pub filtered: usize,
    pub emitted: usize,
}

#[derive(Debug, Clone)]
pub struct ArpeOutput {
    pub pairs: Vec<QALPair>,
    pub report: ArpeReport,
}

fn node_name(path: &ExploredPath, pattern: &ReasoningPattern, node: usize, kg: &KnowledgeGraph) -> String {
    if node == ANSWER_NODE {
        "?answer".to_owned()
    } else if pattern.nodes[node].key_path.is_some() {
        kg.display_term(&path.nodes[node]).to_owned()
    } else {
        format!("?x{node}")
    }
}

/// Triples of the path with key entities labeled and the answer hidden.
pub fn path_text(path: &ExploredPath, pattern: &ReasoningPattern, kg: &KnowledgeGraph) -> String {
    pattern
        .edges
        .iter()
        .zip(&path.steps)
        .map(|(edge, step)| {
            let parent = node_name(path, pattern, edge.parent, kg);
            let child = node_name(path, pattern, edge.child, kg);
            let (s, o) = match edge.direction {
                Direction::Forward => (child, parent),
                Direction::Reverse => (parent, child),
            };
            format!("({s}, {}, {o})", step.relation)
        })
        .collect::<Vec<_>>()
        .join(" ; ")
}

fn key_labels(path: &ExploredPath, pattern: &ReasoningPattern, kg: &KnowledgeGraph) -> Vec<String> {
    path.keys(pattern).map(|t| kg.display_term(t).to_owned()).collect()
}

/// Asks the model for one question about the path's hidden answer.
pub fn generate_question(
    path: &ExploredPath,
    pattern: &ReasoningPattern,
    kg: &KnowledgeGraph,
    prompt: &PromptTemplate,
    llm: &dyn LlmBackend,
) -> Result<String, LlmError> {
    let words: Vec<String> = path.steps.iter().map(|s| humanize_relation(&s.relation)).collect();
    let bindings = Bindings::from([
        ("path".to_owned(), path_text(path, pattern, kg)),
        ("entities".to_owned(), key_labels(path, pattern, kg).join(" and ")),
        ("relation_words".to_owned(), words.join(" and ")),
    ]);
    let req = GenerationRequest::from_template(prompt, bindings)?;
    let text = complete(&req, llm)?.text;
    Ok(list_items(&text)?.swap_remove(0))
}

struct Candidate<'a> {
    answer: &'a Term,
    index: usize,
    path: ExploredPath,
    form: SExpr,
}

/// Explores, validates, phrases and filters for the top patterns of `training`.
///
/// Output order is pattern rank, then answer id, then path index. Questions
/// are generated in batches and generation stops once the pattern's cap is
/// reached.
pub fn run_arpe(
    training: &[QALPair],
    kg: &KnowledgeGraph,
    config: &ArpeConfig,
    prompt: &PromptTemplate,
    llm: &dyn LlmBackend,
) -> ArpeOutput {
    let mut report = ArpeReport::default();
    let mut pairs = Vec::new();
    let mut seen_questions = BTreeSet::new();
    for cluster in group_by_pattern(training, config.patterns) {
        let mut pr = PatternReport {
            rank: cluster.rank,
            skeleton: cluster.skeleton.to_string(),
            members: cluster.members.len(),
            answers: cluster.answers.len(),
            ..PatternReport::default()
        };
        match ReasoningPattern::from_skeleton(&cluster.skeleton) {
            Ok(pattern) => {
                let emitted = run_pattern(&pattern, &cluster.answers, kg, config, prompt, llm, &mut pr, &mut seen_questions);
                pairs.extend(emitted);
            }
            Err(e) => {
                tracing::warn!(skeleton = %cluster.skeleton, error = %e, "skipping pattern");
                pr.skipped = Some(e.to_string());
            }
        }
        report.raw += pr.raw;
        report.validated += pr.validated;
        report.filtered += pr.filtered;
        report.emitted += pr.emitted;
        report.patterns.push(pr);
    }
    ArpeOutput { pairs, report }
}

#[allow(clippy::too_many_arguments)]
fn run_pattern(
    pattern: &ReasoningPattern,
    answer_ids: &[String],
    kg: &KnowledgeGraph,
    config: &ArpeConfig,
    prompt: &PromptTemplate,
    llm: &dyn LlmBackend,
    pr: &mut PatternReport,
    seen_questions: &mut BTreeSet<String>,
) -> Vec<QALPair> {
    let mut answers: Vec<Term> = Vec::new();
    for id in answer_ids {
        match kg.resolve(id) {
            Some(t) => answers.push(t),
            None => pr.missing_answers += 1,
        }
    }
    answers.sort();
    answers.dedup();

    let mut explore = ExploreConfig::new(config.paths_per_answer, config.seed);
    explore.fan_out = config.fan_out;
    let explored = bounded_map(&answers, config.concurrency, |a| explore_paths_with(pattern, a, &explore, kg));

    let mut candidates = Vec::new();
    for (answer, paths) in answers.iter().zip(explored) {
        pr.paths += paths.len();
        for (index, path) in paths.into_iter().enumerate() {
            match build_logical_form(&path, pattern) {
                Ok(form) if validate(&form, answer, kg) => candidates.push(Candidate { answer, index, path, form }),
                Ok(form) => {
                    tracing::warn!(form = %form, "explored form does not return its answer");
                    pr.failures += 1;
                }
                Err(e) => {
                    tracing::warn!(error = %e, "cannot build form from path");
                    pr.failures += 1;
                }
            }
        }
    }
    pr.validated = candidates.len();

    let mut out = Vec::new();
    let batch = config.concurrency.max(1) * 4;
    'batches: for chunk in candidates.chunks(batch) {
        let questions = bounded_map(chunk, config.concurrency, |c| generate_question(&c.path, pattern, kg, prompt, llm));
        for (c, q) in chunk.iter().zip(questions) {
            if out.len() >= config.cap_per_pattern {
                break 'batches;
            }
            let q = match q {
                Ok(q) => q,
                Err(e) => {
                    tracing::warn!(answer = %c.answer.as_str(), error = %e, "question generation failed");
                    pr.failures += 1;
                    continue;
                }
            };
            pr.raw += 1;
            if let Some(why) = reject_reason(&q, kg.display_term(c.answer)) {
                *pr.rejected.entry(rejection_name(why).to_owned()).or_default() += 1;
                continue;
            }
            pr.filtered += 1;
            if !seen_questions.insert(normalize_question(&q)) {
                pr.duplicates += 1;
                continue;
            }
            out.push(to_pair(q, c, pattern, kg, pr.rank));
        }
    }
    pr.emitted = out.len();
    out
}

fn rejection_name(r: Rejection) -> &'static str {
    match r {
        Rejection::Placeholder => "placeholder",
        Rejection::RelationToken => "relation-token",
        Rejection::AnswerLeak => "answer-leak",
    }
}

fn to_pair(question: String, c: &Candidate<'_>, pattern: &ReasoningPattern, kg: &KnowledgeGraph, rank: usize) -> QALPair {
    let keys: Vec<&str> = c.path.keys(pattern).map(Term::as_str).collect();
    let mut pair = QALPair::new(question, c.form.clone(), Source::Arpe)
        .with_meta("pattern", pattern.skeleton.as_str())
        .with_meta("pattern_rank", rank.to_string())
        .with_meta("answer", c.answer.as_str())
        .with_meta("answer_label", kg.display_term(c.answer))
        .with_meta("relations", c.path.relations().join(" "))
        .with_meta("keys", keys.join(" "))
        .with_meta("path_index", c.index.to_string());
    pair.answers = vec![c.answer.as_str().to_owned()];
    pair
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::kg::Triple;
    use crate::lf::{interpret, parse, skeleton};
    use crate::llm::{templates, MockLlm};

    fn toy() -> KnowledgeGraph {
        let mut triples = Vec::new();
        let mut labels = HashMap::new();
        for i in 0..6 {
            triples.push(Triple::new(format!("m.p{i}"), "people.person.nationality", Term::entity("m.usa")));
            triples.push(Triple::new(format!("m.p{i}"), "people.person.place_of_birth", Term::entity(format!("m.c{i}"))));
            labels.insert(format!("m.p{i}"), format!("Person {i}"));
            labels.insert(format!("m.c{i}"), format!("City {i}"));
        }
        labels.insert("m.usa".into(), "United States".into());
        KnowledgeGraph::from_triples(triples, labels)
    }

    fn training() -> Vec<QALPair> {
        let mut p = QALPair::new("where was person 0 born", parse("(JOIN (R people.person.place_of_birth) m.p0)").unwrap(), Source::Original);
        p.answers = vec!["m.c0".into(), "m.c1".into(), "m.c2".into(), "m.c3".into()];
        let mut q = QALPair::new("q", parse("(JOIN people.person.nationality m.usa)").unwrap(), Source::Original);
        q.answers = vec!["m.p1".into()];
        vec![p, q]
    }

    #[test]
    fn cap_and_validity() {
        let kg = toy();
        let cfg = ArpeConfig {
            patterns: 1,
            cap_per_pattern: 3,
            ..ArpeConfig::default()
        };
        let out = run_arpe(&training(), &kg, &cfg, &templates::arpe(), &MockLlm::new());
        assert_eq!(out.pairs.len(), 3);
        for p in &out.pairs {
            let answer = Term::entity(&p.answers[0]);
            assert!(interpret(&p.logical_form, &kg).unwrap().contains(&answer));
            assert_eq!(skeleton(&p.logical_form).as_str(), "(JOIN (R []) [])");
            assert!(reject_reason(&p.question, kg.display_term(&answer)).is_none());
        }
        assert_eq!(out.report.patterns[0].emitted, 3);
    }

    #[test]
    fn deterministic() {
        let kg = toy();
        let cfg = ArpeConfig::default();
        let a = run_arpe(&training(), &kg, &cfg, &templates::arpe(), &MockLlm::new());
        let b = run_arpe(&training(), &kg, &cfg, &templates::arpe(), &MockLlm::new());
        assert_eq!(a.pairs, b.pairs);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn path_description_hides_answer() {
        let kg = toy();
        let pattern = ReasoningPattern::from_skeleton(&skeleton(&parse("(JOIN (R x) y)").unwrap())).unwrap();
        let path = &crate::augment::arpe::explore_paths(&pattern, &Term::entity("m.c2"), 1, &kg, 0)[0];
        let text = path_text(path, &pattern, &kg);
        assert_eq!(text, "(Person 2, people.person.place_of_birth, ?answer)");
        let q = generate_question(path, &pattern, &kg, &templates::arpe(), &MockLlm::new()).unwrap();
        assert!(q.contains("Person 2"));
        assert!(!q.contains("City 2"));
    }

    #[test]
    fn aggregate_pattern_is_skipped() {
        let mut p = QALPair::new("how many", parse("(COUNT (JOIN (R r) m.x))").unwrap(), Source::Original);
        p.answers = vec!["1".into()];
        let out = run_arpe(&[p], &toy(), &ArpeConfig::default(), &templates::arpe(), &MockLlm::new());
        assert!(out.pairs.is_empty());
        assert!(out.report.patterns[0].skipped.is_some());
    }
}
