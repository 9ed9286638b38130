//! Single-hop pseudo-question generation.
//!
//! For each relation with at least one triple: sample `k` head entities and
//! an example triple, ask the model for `k` question templates containing
//! `[SUBJECT]`, then fill the templates with the sampled heads. The logical
//! form asks for the tail: `(JOIN (R relation) subject)`.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{QALPair, Source};
use crate::kg::{KnowledgeGraph, LabeledTriple};
use crate::lf::SExpr;
use crate::llm::{complete, parse_numbered_list, Bindings, GenerationRequest, LlmBackend, LlmError, PromptTemplate};
use crate::parallel::bounded_map;

pub const SUBJECT: &str = "[SUBJECT]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionTemplate {
    pub relation: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TemplateViolation {
    #[error("template must contain [SUBJECT] exactly once, found {0}")]
    SubjectCount(usize),
    #[error("template repeats the relation id")]
    LeaksRelation,
}

/// True when `text` contains `relation` not embedded in a longer identifier.
fn mentions_relation(text: &str, relation: &str) -> bool {
    let hay = text.to_lowercase();
    let needle = relation.to_lowercase();
    if needle.is_empty() {
        return false;
    }
    let is_ident = |c: char| c.is_alphanumeric() || c == '_' || c == '.';
    hay.match_indices(&needle).any(|(i, _)| {
        let before = hay[..i].chars().next_back();
        let after = hay[i + needle.len()..].chars().next();
        !before.is_some_and(is_ident) && !after.is_some_and(is_ident)
    })
}

impl QuestionTemplate {
    pub fn new(relation: impl Into<String>, text: impl Into<String>) -> Result<Self, TemplateViolation> {
        let relation = relation.into();
        let text = text.into();
        let n = text.matches(SUBJECT).count();
        if n != 1 {
            return Err(TemplateViolation::SubjectCount(n));
        }
        if mentions_relation(&text, &relation) {
            return Err(TemplateViolation::LeaksRelation);
        }
        Ok(Self { relation, text })
    }

    pub fn fill(&self, subject_label: &str) -> String {
        self.text.replace(SUBJECT, subject_label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateBatch {
    pub templates: Vec<QuestionTemplate>,
    /// Lines that parsed but broke a template invariant.
    pub dropped: usize,
}

pub fn generate_templates(
    relation: &str,
    example: &LabeledTriple,
    prompt: &PromptTemplate,
    k: usize,
    llm: &dyn LlmBackend,
) -> Result<TemplateBatch, LlmError> {
    let bindings = Bindings::from([
        ("relation".to_owned(), relation.to_owned()),
        (
            "triple".to_owned(),
            format!("({}, {}, {})", example.subject_label, relation, example.object_label),
        ),
        ("k".to_owned(), k.to_string()),
    ]);
    let req = GenerationRequest::from_template(prompt, bindings)?;
    let text = complete(&req, llm)?.text;
    let parsed = parse_numbered_list(&text, k)?;
    let mut templates = Vec::new();
    let mut dropped = 0;
    for line in parsed.items {
        match QuestionTemplate::new(relation, line) {
            Ok(t) => templates.push(t),
            Err(why) => {
                dropped += 1;
                tracing::warn!(relation, %why, "dropping question template");
            }
        }
    }
    Ok(TemplateBatch { templates, dropped })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Template i with subject i.
    #[default]
    Zip,
    /// Every template with every subject.
    Cartesian,
}

pub fn build_pairs(templates: &[QuestionTemplate], subjects: &[(String, String)], pairing: Pairing) -> Vec<QALPair> {
    let combos: Vec<(usize, usize)> = match pairing {
        Pairing::Zip => (0..templates.len().min(subjects.len())).map(|i| (i, i)).collect(),
        Pairing::Cartesian => (0..templates.len())
            .flat_map(|t| (0..subjects.len()).map(move |s| (t, s)))
            .collect(),
    };
    combos
        .into_iter()
        .map(|(ti, si)| {
            let t = &templates[ti];
            let (id, label) = &subjects[si];
            let form = SExpr::join(SExpr::reverse(SExpr::relation(&t.relation)), SExpr::entity(id));
            QALPair::new(t.fill(label), form, Source::Spqg)
                .with_meta("relation", &t.relation)
                .with_meta("subject", id)
                .with_meta("template", ti.to_string())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpqgConfig {
    pub k: usize,
    pub seed: u64,
    pub pairing: Pairing,
    pub concurrency: usize,
}

impl Default for SpqgConfig {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            pairing: Pairing::Zip,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SpqgReport {
    pub relations_requested: usize,
    pub relations_surviving: usize,
    pub relations_failed: usize,
    pub templates_dropped: usize,
    pub pairs: usize,
    /// Failure message per relation that was skipped.
    pub failures: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct SpqgOutput {
    pub pairs: Vec<QALPair>,
    pub report: SpqgReport,
}

/// Runs the sweep. Per-relation failures are logged, counted and skipped.
pub fn run_spqg(
    kg: &KnowledgeGraph,
    relations: &[String],
    config: &SpqgConfig,
    prompt: &PromptTemplate,
    llm: &dyn LlmBackend,
) -> SpqgOutput {
    let surviving = kg.relations_with_triples(relations);
    let results = bounded_map(&surviving, config.concurrency, |r| {
        let subjects = kg.sample_subjects(r, config.k, config.seed);
        let example = kg.sample_triple(r, config.seed).map_err(|e| e.to_string())?;
        let batch = generate_templates(r, &example, prompt, config.k, llm).map_err(|e| e.to_string())?;
        Ok::<_, String>((build_pairs(&batch.templates, &subjects, config.pairing), batch.dropped))
    });

    let mut report = SpqgReport {
        relations_requested: relations.len(),
        relations_surviving: surviving.len(),
        ..SpqgReport::default()
    };
    let mut pairs = Vec::new();
    for (r, res) in surviving.iter().zip(results) {
        match res {
            Ok((mut p, dropped)) => {
                report.templates_dropped += dropped;
                for pair in &mut p {
                    pair.meta.insert("seed".into(), config.seed.to_string());
                }
                pairs.extend(p);
            }
            Err(e) => {
                tracing::warn!(relation = %r, error = %e, "skipping relation");
                report.relations_failed += 1;
                report.failures.insert(r.clone(), e);
            }
        }
    }
    report.pairs = pairs.len();
    SpqgOutput { pairs, report }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::kg::{Term, Triple};
    use crate::llm::{templates, MockLlm};

    #[test]
    fn template_invariants() {
        assert!(QuestionTemplate::new("people.person.place_of_birth", "Where was [SUBJECT] born?").is_ok());
        assert_eq!(
            QuestionTemplate::new("r.x", "Where was he born?"),
            Err(TemplateViolation::SubjectCount(0))
        );
        assert_eq!(
            QuestionTemplate::new("r.x", "[SUBJECT] and [SUBJECT]?"),
            Err(TemplateViolation::SubjectCount(2))
        );
        assert_eq!(
            QuestionTemplate::new("people.person.place_of_birth", "What is people.person.place_of_birth of [SUBJECT]?"),
            Err(TemplateViolation::LeaksRelation)
        );
        assert!(QuestionTemplate::new("r", "Is there a record for [SUBJECT]?").is_ok());
    }

    #[test]
    fn fill_and_construct() {
        let t = QuestionTemplate::new("people.person.place_of_birth", "where was [SUBJECT] born").unwrap();
        let pairs = build_pairs(&[t], &[("m.9".into(), "Barack Obama".into())], Pairing::Zip);
        assert_eq!(pairs[0].question, "where was Barack Obama born");
        assert_eq!(pairs[0].logical_form.to_string(), "(JOIN (R people.person.place_of_birth) m.9)");
    }

    #[test]
    fn zip_and_cartesian_counts() {
        let ts: Vec<_> = (0..3)
            .map(|i| QuestionTemplate::new("a.b", format!("q{i} [SUBJECT]")).unwrap())
            .collect();
        let ss: Vec<_> = (0..3).map(|i| (format!("m.{i}"), format!("E{i}"))).collect();
        assert_eq!(build_pairs(&ts, &ss, Pairing::Zip).len(), 3);
        assert_eq!(build_pairs(&ts, &ss, Pairing::Cartesian).len(), 9);
        assert!(build_pairs(&[], &ss, Pairing::Zip).is_empty());
    }

    #[test]
    fn bad_lines_are_dropped_and_counted() {
        let kg = KnowledgeGraph::from_triples(
            [Triple::new("m.1", "a.b.born_in", Term::entity("m.2"))],
            HashMap::new(),
        );
        let example = kg.sample_triple("a.b.born_in", 0).unwrap();
        let prompt = PromptTemplate::new("custom", "{relation} {triple} {k}");
        let rendered = prompt
            .render(&Bindings::from([
                ("relation".into(), "a.b.born_in".into()),
                ("triple".into(), "(m.1, a.b.born_in, m.2)".into()),
                ("k".into(), "2".into()),
            ]))
            .unwrap();
        let llm = MockLlm::new().strict().respond(&rendered, "1. Where was [SUBJECT] born?\n2. Where was he born?");
        let batch = generate_templates("a.b.born_in", &example, &prompt, 2, &llm).unwrap();
        assert_eq!(batch.templates.len(), 1);
        assert_eq!(batch.dropped, 1);
    }

    #[test]
    fn sweep_skips_empty_relations() {
        let kg = KnowledgeGraph::from_triples(
            [
                Triple::new("m.1", "x.y.capital", Term::entity("m.2")),
                Triple::new("m.3", "x.y.capital", Term::entity("m.4")),
            ],
            HashMap::from([("m.1".into(), "France".into()), ("m.3".into(), "Peru".into())]),
        );
        let cfg = SpqgConfig {
            k: 2,
            ..SpqgConfig::default()
        };
        let out = run_spqg(
            &kg,
            &["x.y.capital".into(), "x.y.none".into()],
            &cfg,
            &templates::spqg(),
            &MockLlm::new(),
        );
        assert_eq!(out.report.relations_surviving, 1);
        assert_eq!(out.pairs.len(), 2);
        assert!(out.pairs.iter().all(|p| p.question.contains("France") || p.question.contains("Peru")));
    }
}
