//! Ranked candidate logical forms for a question, and the instruction-tuning
//! dataset a parser model would be trained on.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::augment::QALPair;
use crate::jsonl::{self, JsonlError};
use crate::kg::substream;
use crate::lf::{labelize, parse, skeleton, SExpr};
use crate::llm::{complete, list_items, templates, Bindings, GenerationRequest, LlmBackend, LlmError, PromptTemplate};
use crate::Score;

pub const WEBQSP_BEAM: usize = 10;
pub const CWQ_BEAM: usize = 8;
pub const FEW_SHOT_EXEMPLARS: usize = 5;

pub const DEFAULT_INSTRUCTION: &str = "Generate a Logical Form query that retrieves the information corresponding \
to the given question. Use S-expressions with JOIN, R, AND, COUNT, ARGMAX, ARGMIN, gt, ge, lt and le; \
write entities by their names.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateForm {
    Parsed(SExpr),
    /// Text that did not parse, with the reason.
    Raw { text: String, error: String },
}

impl CandidateForm {
    pub fn from_text(text: &str) -> Self {
        match parse(text) {
            Ok(f) => CandidateForm::Parsed(f),
            Err(e) => CandidateForm::Raw {
                text: text.to_owned(),
                error: e.to_string(),
            },
        }
    }

    pub fn parsed(&self) -> Option<&SExpr> {
        match self {
            CandidateForm::Parsed(f) => Some(f),
            CandidateForm::Raw { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<S> {
    pub rank: usize,
    pub score: S,
    pub form: CandidateForm,
    /// Rank of the candidate this one was derived from, for refined lists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList<S = f64> {
    pub question: String,
    pub entries: Vec<Candidate<S>>,
}

impl<S: Score> CandidateList<S> {
    /// Beam output in order; entry `i` gets rank `i` and score `1 / (1 + i)`.
    pub fn from_beams<T: AsRef<str>>(question: impl Into<String>, beams: &[T]) -> Self {
        let entries = beams
            .iter()
            .enumerate()
            .map(|(rank, text)| Candidate {
                rank,
                score: S::one() / (S::one() + S::of_count(rank)),
                form: CandidateForm::from_text(text.as_ref().trim()),
                parent: None,
            })
            .collect();
        Self {
            question: question.into(),
            entries,
        }
    }

    /// Builds a list from already-ranked forms, renumbering ranks from 0.
    pub fn from_forms(question: impl Into<String>, forms: impl IntoIterator<Item = (SExpr, S, Option<usize>)>) -> Self {
        let entries = forms
            .into_iter()
            .enumerate()
            .map(|(rank, (f, score, parent))| Candidate {
                rank,
                score,
                form: CandidateForm::Parsed(f),
                parent,
            })
            .collect();
        Self {
            question: question.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parseable entries in rank order.
    pub fn parsed(&self) -> impl Iterator<Item = (&Candidate<S>, &SExpr)> + '_ {
        self.entries.iter().filter_map(|c| c.form.parsed().map(|f| (c, f)))
    }

    /// False when no entry parsed; such a question cannot be answered.
    pub fn has_parseable(&self) -> bool {
        self.parsed().next().is_some()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CandidateError {
    #[error("beam must be at least 1")]
    ZeroBeam,
    #[error("question id {0:?} is not in the predictions file")]
    MissingQid(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    File(#[from] JsonlError),
}

/// Source of raw beam text for a question.
pub trait CandidateBackend: Send + Sync {
    fn beams(&self, qid: &str, question: &str, beam: usize) -> Result<Vec<String>, CandidateError>;
}

/// Up to `beam` ranked candidates. Unparseable lines are kept as raw entries.
pub fn generate_candidates<S: Score>(
    qid: &str,
    question: &str,
    beam: usize,
    backend: &dyn CandidateBackend,
) -> Result<CandidateList<S>, CandidateError> {
    if beam == 0 {
        return Err(CandidateError::ZeroBeam);
    }
    let mut beams = backend.beams(qid, question, beam)?;
    beams.truncate(beam);
    let list = CandidateList::from_beams(question, &beams);
    if !list.has_parseable() {
        tracing::warn!(qid, "no parseable candidate");
    }
    Ok(list)
}

#[derive(Debug, Deserialize)]
struct PredictionRecord {
    qid: String,
    beams: Vec<String>,
}

/// Pre-computed beams keyed by question id, e.g. from an external fine-tuned model.
#[derive(Debug, Clone, Default)]
pub struct FileBackend {
    beams: HashMap<String, Vec<String>>,
}

impl FileBackend {
    /// Reads JSON Lines `{"qid", "beams": [..]}`. A repeated qid is an error.
    pub fn load(path: &Path) -> Result<Self, CandidateError> {
        let mut beams = HashMap::new();
        for (line, rec) in jsonl::read::<PredictionRecord>(path)? {
            if beams.insert(rec.qid.clone(), rec.beams).is_some() {
                return Err(jsonl::malformed(path, line, format!("duplicate qid {:?}", rec.qid)).into());
            }
        }
        Ok(Self { beams })
    }

    pub fn from_map(beams: HashMap<String, Vec<String>>) -> Self {
        Self { beams }
    }
}

impl CandidateBackend for FileBackend {
    fn beams(&self, qid: &str, _question: &str, _beam: usize) -> Result<Vec<String>, CandidateError> {
        self.beams
            .get(qid)
            .cloned()
            .ok_or_else(|| CandidateError::MissingQid(qid.to_owned()))
    }
}

/// Few-shot prompting with exemplars drawn from the training set.
pub struct FewShotBackend<'a> {
    llm: &'a dyn LlmBackend,
    prompt: PromptTemplate,
    instruction: String,
    examples: String,
}

impl<'a> FewShotBackend<'a> {
    /// Samples [`FEW_SHOT_EXEMPLARS`] training pairs with `seed`; their forms
    /// are shown with entity labels, as in the SFT data.
    pub fn new(llm: &'a dyn LlmBackend, training: &[QALPair], labels: &HashMap<String, String>, seed: u64) -> Self {
        let mut rng = substream(seed, "few-shot", "");
        let examples = training
            .choose_multiple(&mut rng, FEW_SHOT_EXEMPLARS)
            .map(|p| format!("Question: {}\nLogical form: {}\n", p.question, labelize(&p.logical_form, labels)))
            .collect::<Vec<_>>()
            .join("\n");
        Self {
            llm,
            prompt: templates::parse(),
            instruction: DEFAULT_INSTRUCTION.to_owned(),
            examples,
        }
    }

    pub fn with_instruction(mut self, instruction: impl Into<String>) -> Self {
        self.instruction = instruction.into();
        self
    }

    pub fn with_prompt(mut self, prompt: PromptTemplate) -> Self {
        self.prompt = prompt;
        self
    }

    pub fn examples(&self) -> &str {
        &self.examples
    }
}

impl CandidateBackend for FewShotBackend<'_> {
    fn beams(&self, _qid: &str, question: &str, beam: usize) -> Result<Vec<String>, CandidateError> {
        let bindings = Bindings::from([
            ("instruction".to_owned(), self.instruction.clone()),
            ("examples".to_owned(), self.examples.clone()),
            ("question".to_owned(), question.to_owned()),
            ("beam".to_owned(), beam.to_string()),
        ]);
        let req = GenerationRequest::from_template(&self.prompt, bindings).map_err(LlmError::from)?;
        let text = complete(&req, self.llm)?.text;
        let mut lines: Vec<String> = list_items(&text)?
            .into_iter()
            .map(|l| l.trim_start_matches("Logical form:").trim().to_owned())
            .collect();
        lines.truncate(beam);
        Ok(lines)
    }
}

/// Fraction of items whose top candidate has the gold skeleton. A raw top
/// entry or an empty list counts as a miss.
pub fn skeleton_accuracy<S: Score>(items: &[(SExpr, CandidateList<S>)]) -> S {
    if items.is_empty() {
        return S::zero();
    }
    let hits = items
        .iter()
        .filter(|(gold, c)| {
            c.entries
                .first()
                .and_then(|e| e.form.parsed())
                .is_some_and(|f| skeleton(f) == skeleton(gold))
        })
        .count();
    S::of_count(hits) / S::of_count(items.len())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SftReport {
    pub records: usize,
    pub per_source: BTreeMap<String, usize>,
    /// Entity occurrences written as ids because no label was known.
    pub unlabeled_entities: usize,
}

pub fn sft_records(
    sources: &[(&str, &[QALPair])],
    instruction: &str,
    labels: &HashMap<String, String>,
) -> (Vec<SftRecord>, SftReport) {
    let mut report = SftReport::default();
    let mut records = Vec::new();
    for (name, pairs) in sources {
        for p in *pairs {
            report.unlabeled_entities += p
                .logical_form
                .entities()
                .into_iter()
                .filter(|e| !labels.contains_key(*e))
                .count();
            records.push(SftRecord {
                instruction: instruction.to_owned(),
                input: p.question.clone(),
                output: labelize(&p.logical_form, labels).to_string(),
            });
        }
        *report.per_source.entry((*name).to_owned()).or_default() += pairs.len();
        tracing::info!(source = name, pairs = pairs.len(), "added to SFT dataset");
    }
    report.records = records.len();
    (records, report)
}

/// Writes the instruction-tuning file: one `{instruction, input, output}`
/// record per pair, with entity ids in `output` replaced by labels.
pub fn build_sft_dataset(
    sources: &[(&str, &[QALPair])],
    instruction: &str,
    labels: &HashMap<String, String>,
    out: &Path,
) -> Result<SftReport, JsonlError> {
    let (records, report) = sft_records(sources, instruction, labels);
    if records.is_empty() {
        tracing::warn!(path = %out.display(), "SFT dataset is empty");
    }
    jsonl::write(out, &records)?;
    Ok(report)
}
