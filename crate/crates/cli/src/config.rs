//! The shared JSON config file. Every field is optional; command-line flags
//! win over config values, and relative paths are taken from the config
//! file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kgaug_core::augment::spqg::Pairing;
use kgaug_core::llm::OpenAiConfig;
use kgaug_core::refine::EmbeddingConfig;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub kg: KgSection,
    pub llm: LlmSection,
    pub augment: AugmentSection,
    pub sft: SftSection,
    pub parse: ParseSection,
    pub refine: RefineSection,
    pub eval: EvalSection,
    #[serde(skip)]
    dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KgSection {
    pub triples: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Remote SPARQL endpoint used for execution instead of the in-memory graph.
    pub endpoint: Option<String>,
    pub base_iri: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    /// `mock` or `openai`.
    pub backend: Option<String>,
    pub mock_dir: Option<PathBuf>,
    pub openai: Option<OpenAiConfig>,
    pub concurrency: Option<usize>,
    /// Template name to a file whose contents replace the built-in prompt.
    pub prompts: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub seed: Option<u64>,
    pub training: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub spqg: SpqgSection,
    pub spqr: SpqrSection,
    pub arpe: ArpeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpqgSection {
    pub k: Option<usize>,
    pub pairing: Option<Pairing>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpqrSection {
    pub rw: Option<usize>,
    pub top_patterns: Option<usize>,
    pub length_guard: Option<bool>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArpeSection {
    pub patterns: Option<usize>,
    pub paths_per_answer: Option<usize>,
    pub cap: Option<usize>,
    pub fan_out: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SftSection {
    pub instruction: Option<String>,
    pub sources: Vec<SourceSpec>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParseSection {
    pub beam: Option<usize>,
    /// `file` or `llm`.
    pub backend: Option<String>,
    pub predictions: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub training: Option<PathBuf>,
    pub instruction: Option<String>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineSection {
    pub k: Option<usize>,
    pub combo_cap: Option<usize>,
    pub oracle_entities: Option<bool>,
    pub aliases: Option<PathBuf>,
    /// `lexical` or `embedding`, for entity retrieval.
    pub entity_backend: Option<String>,
    pub embedding: Option<EmbeddingConfig>,
    pub candidates: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub dataset: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub both_empty_agree: Option<bool>,
    pub skip_empty_gold_for_hits: Option<bool>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Config =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Resolves a config-relative path.
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }
}

/// The flag value if given, else the config value (resolved against the
/// config directory), else a missing-key error naming `key`.
pub fn req_path(flag: &Option<PathBuf>, cfg: &Config, from_cfg: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
    opt_path(flag, cfg, from_cfg).ok_or_else(|| CliError::MissingKey(key.to_owned()))
}

pub fn opt_path(flag: &Option<PathBuf>, cfg: &Config, from_cfg: &Option<PathBuf>) -> Option<PathBuf> {
    flag.clone().or_else(|| from_cfg.as_deref().map(|p| cfg.path(p)))
}

pub fn pick<T: Clone>(flag: &Option<T>, from_cfg: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| from_cfg.clone()).unwrap_or(default)
}
