use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use kgaug_core::augment::arpe::{run_arpe, ArpeConfig};
use kgaug_core::augment::spqg::{run_spqg, SpqgConfig};
use kgaug_core::augment::spqr::{run_spqr, top_skeletons, SpqrConfig};
use kgaug_core::augment::{read_pairs, write_pairs, QALPair, Source};
use kgaug_core::candidates::{
    build_sft_dataset, generate_candidates, CandidateBackend, CandidateError, CandidateList, FewShotBackend, FileBackend,
    DEFAULT_INSTRUCTION, WEBQSP_BEAM,
};
use kgaug_core::eval::{evaluate, load_dataset, read_results, render_table, write_report, write_results, EvalItem, MetricsConfig};
use kgaug_core::jsonl;
use kgaug_core::kg::{load_kg, EndpointConfig, KnowledgeGraph, RemoteEndpoint};
use kgaug_core::llm::{templates, LlmBackend, MockLlm, OpenAiClient, PromptTemplate, API_KEY_ENV};
use kgaug_core::parallel::bounded_map;
use kgaug_core::refine::{
    answer, with_gold_entities, AliasTable, EmbeddingClient, EmbeddingIndex, RefineConfig, SimilarityBackend,
};
use kgaug_core::sparql::{InMemoryEngine, SparqlBackend, DEFAULT_BASE_IRI};
use kgaug_core::{Candidates, Metrics, RefineIndices, Similarity};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{opt_path, pick, req_path, Config};
use crate::error::{run_err, CliError};
use crate::manifest::Manifest;
use crate::{AnswerArgs, AugmentCmd, Cli, Cmd, EvalArgs, KgArgs, KgCmd, LlmArgs, ParseArgs, SftCmd};

const DEFAULT_CONCURRENCY: usize = 4;

pub fn dispatch(cli: &Cli, cfg: &Config) -> Result<(), CliError> {
    let ctx = Ctx { cli, cfg };
    match &cli.cmd {
        Cmd::Kg { cmd: KgCmd::Stats { kg, out } } => ctx.kg_stats(kg, out),
        Cmd::Augment { cmd } => match cmd {
            AugmentCmd::Spqg { kg, llm, k, relations, pairing, out } => ctx.spqg(kg, llm, *k, relations, *pairing, out),
            AugmentCmd::Spqr { llm, training, rw, top_patterns, length_guard, out } => {
                ctx.spqr(llm, training, *rw, *top_patterns, *length_guard, out)
            }
            AugmentCmd::Arpe { kg, llm, training, patterns, paths_per_answer, cap, fan_out, out } => {
                ctx.arpe(kg, llm, training, [*patterns, *paths_per_answer, *cap, *fan_out], out)
            }
        },
        Cmd::Sft { cmd: SftCmd::Build { kg, sources, instruction, out } } => ctx.sft(kg, sources, instruction, out),
        Cmd::Parse(a) => ctx.parse(a),
        Cmd::Answer(a) => ctx.answer(a),
        Cmd::Eval(a) => ctx.eval(a),
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: &'a Config,
}

#[derive(Serialize, Deserialize)]
struct CandidateRecord {
    qid: String,
    candidates: Candidates,
}

impl Ctx<'_> {
    fn seed(&self, section: Option<u64>) -> u64 {
        self.cli.seed.or(section).or(self.cfg.seed).unwrap_or(0)
    }

    fn finish(&self, mut m: Manifest, artifact: &Path) -> Result<(), CliError> {
        m.output(artifact)?;
        let path = m.write(self.cli.manifest.as_deref(), artifact)?;
        tracing::info!(manifest = %path.display(), "run complete");
        Ok(())
    }

    fn triples(&self, a: &KgArgs) -> Result<PathBuf, CliError> {
        req_path(&a.triples, self.cfg, &self.cfg.kg.triples, "kg.triples")
    }

    fn labels(&self, a: &KgArgs) -> Option<PathBuf> {
        opt_path(&a.labels, self.cfg, &self.cfg.kg.labels)
    }

    fn load_kg(&self, a: &KgArgs, m: &mut Manifest) -> Result<KnowledgeGraph, CliError> {
        let triples = self.triples(a)?;
        let labels = self.labels(a);
        m.input(&triples)?;
        if let Some(l) = &labels {
            m.input(l)?;
        }
        load_kg(&triples, labels.as_deref()).map_err(run_err)
    }

    /// Label map only, for commands that need no triples.
    fn load_labels(&self, a: &KgArgs, m: &mut Manifest) -> Result<HashMap<String, String>, CliError> {
        match self.labels(a) {
            Some(l) => {
                m.input(&l)?;
                kgaug_core::kg::load_labels(&l).map_err(run_err)
            }
            None => Ok(HashMap::new()),
        }
    }

    fn concurrency(&self, a: &LlmArgs) -> usize {
        pick(&a.concurrency, &self.cfg.llm.concurrency, DEFAULT_CONCURRENCY).max(1)
    }

    fn llm(&self, a: &LlmArgs) -> Result<Box<dyn LlmBackend>, CliError> {
        let backend = pick(&a.llm, &self.cfg.llm.backend, "mock".to_owned());
        match backend.as_str() {
            "mock" => Ok(match opt_path(&a.mock_dir, self.cfg, &self.cfg.llm.mock_dir) {
                Some(dir) => Box::new(MockLlm::with_dir(dir)),
                None => Box::new(MockLlm::new()),
            }),
            "openai" => {
                let config = self.cfg.llm.openai.clone().unwrap_or_default();
                Ok(Box::new(OpenAiClient::new(config, std::env::var(API_KEY_ENV).ok())))
            }
            other => Err(CliError::Config(format!("llm.backend must be mock or openai, got {other:?}"))),
        }
    }

    fn prompt(&self, name: &str) -> Result<PromptTemplate, CliError> {
        let builtin = templates::by_name(name).expect("built-in template");
        match self.cfg.llm.prompts.get(name) {
            Some(p) => {
                let path = self.cfg.path(p);
                let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                Ok(PromptTemplate::new(name, text))
            }
            None => Ok(builtin),
        }
    }

    fn kg_stats(&self, a: &KgArgs, out: &Option<PathBuf>) -> Result<(), CliError> {
        let mut m = Manifest::start("kg stats");
        let kg = self.load_kg(a, &mut m)?;
        let stats = kg.stats();
        let text = serde_json::to_string_pretty(&stats).expect("stats serialize");
        println!("{text}");
        m.counts(stats);
        if let Some(out) = out {
            fs::write(out, text + "\n").map_err(run_err)?;
            self.finish(m, out)?;
        }
        Ok(())
    }

    fn spqg(
        &self,
        kga: &KgArgs,
        llma: &LlmArgs,
        k: Option<usize>,
        relations: &Option<PathBuf>,
        pairing: Option<kgaug_core::augment::spqg::Pairing>,
        out: &Option<PathBuf>,
    ) -> Result<(), CliError> {
        let sec = &self.cfg.augment;
        let out = req_path(out, self.cfg, &sec.spqg.output, "augment.spqg.output")?;
        let mut m = Manifest::start("augment spqg");
        let kg = self.load_kg(kga, &mut m)?;
        let relations: Vec<String> = match opt_path(relations, self.cfg, &sec.relations) {
            Some(p) => {
                m.input(&p)?;
                fs::read_to_string(&p)
                    .map_err(|e| run_err(format!("{}: {e}", p.display())))?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_owned)
                    .collect()
            }
            None => kg.relations().map(str::to_owned).collect(),
        };
        let config = SpqgConfig {
            k: pick(&k, &sec.spqg.k, 5),
            seed: self.seed(sec.seed),
            pairing: pick(&pairing, &sec.spqg.pairing, Default::default()),
            concurrency: self.concurrency(llma),
        };
        let llm = self.llm(llma)?;
        let res = run_spqg(&kg, &relations, &config, &self.prompt("spqg")?, llm.as_ref());
        write_pairs(&out, &res.pairs).map_err(run_err)?;
        m.settings(json!({"k": config.k, "pairing": config.pairing}))
            .seeds(json!({"seed": config.seed}))
            .counts(&res.report);
        self.finish(m, &out)
    }

    fn training(&self, flag: &Option<PathBuf>, from_cfg: &Option<PathBuf>, key: &str, m: &mut Manifest) -> Result<Vec<QALPair>, CliError> {
        let path = req_path(flag, self.cfg, from_cfg, key)?;
        m.input(&path)?;
        load_training(&path)
    }

    fn spqr(
        &self,
        llma: &LlmArgs,
        training: &Option<PathBuf>,
        rw: Option<usize>,
        top: Option<usize>,
        length_guard: bool,
        out: &Option<PathBuf>,
    ) -> Result<(), CliError> {
        let sec = &self.cfg.augment;
        let out = req_path(out, self.cfg, &sec.spqr.output, "augment.spqr.output")?;
        let mut m = Manifest::start("augment spqr");
        let pairs = self.training(training, &sec.training, "augment.training", &mut m)?;
        let top = top.or(sec.spqr.top_patterns);
        let config = SpqrConfig {
            rw: pick(&rw, &sec.spqr.rw, 1),
            pattern_filter: top.map(|r| top_skeletons(&pairs, r)),
            length_guard: length_guard || sec.spqr.length_guard.unwrap_or(false),
            concurrency: self.concurrency(llma),
        };
        let llm = self.llm(llma)?;
        let res = run_spqr(&pairs, &config, &self.prompt("spqr")?, llm.as_ref());
        write_pairs(&out, &res.pairs).map_err(run_err)?;
        m.settings(json!({"rw": config.rw, "top_patterns": top, "length_guard": config.length_guard}))
            .counts(&res.report);
        self.finish(m, &out)
    }

    fn arpe(
        &self,
        kga: &KgArgs,
        llma: &LlmArgs,
        training: &Option<PathBuf>,
        [patterns, paths, cap, fan_out]: [Option<usize>; 4],
        out: &Option<PathBuf>,
    ) -> Result<(), CliError> {
        let sec = &self.cfg.augment;
        let out = req_path(out, self.cfg, &sec.arpe.output, "augment.arpe.output")?;
        let mut m = Manifest::start("augment arpe");
        let kg = self.load_kg(kga, &mut m)?;
        let pairs = self.training(training, &sec.training, "augment.training", &mut m)?;
        let d = ArpeConfig::default();
        let config = ArpeConfig {
            patterns: pick(&patterns, &sec.arpe.patterns, d.patterns),
            paths_per_answer: pick(&paths, &sec.arpe.paths_per_answer, d.paths_per_answer),
            cap_per_pattern: pick(&cap, &sec.arpe.cap, d.cap_per_pattern),
            fan_out: pick(&fan_out, &sec.arpe.fan_out, d.fan_out),
            seed: self.seed(sec.seed),
            concurrency: self.concurrency(llma),
        };
        let llm = self.llm(llma)?;
        let res = run_arpe(&pairs, &kg, &config, &self.prompt("arpe")?, llm.as_ref());
        write_pairs(&out, &res.pairs).map_err(run_err)?;
        let report_path = out.with_extension("report.json");
        let report = serde_json::to_string_pretty(&res.report).expect("report serializes");
        fs::write(&report_path, report + "\n").map_err(run_err)?;
        m.settings(json!({
            "patterns": config.patterns,
            "paths_per_answer": config.paths_per_answer,
            "cap": config.cap_per_pattern,
            "fan_out": config.fan_out,
        }))
        .seeds(json!({"seed": config.seed}))
        .counts(json!({
            "raw": res.report.raw,
            "validated": res.report.validated,
            "filtered": res.report.filtered,
            "emitted": res.report.emitted,
        }));
        m.output(&report_path)?;
        self.finish(m, &out)
    }

    fn sft(&self, kga: &KgArgs, sources: &[String], instruction: &Option<String>, out: &Option<PathBuf>) -> Result<(), CliError> {
        let sec = &self.cfg.sft;
        let out = req_path(out, self.cfg, &sec.output, "sft.output")?;
        let mut specs: Vec<(String, PathBuf)> = Vec::new();
        for s in sources {
            let (name, path) = s
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--source expects name=path, got {s:?}")))?;
            specs.push((name.to_owned(), PathBuf::from(path)));
        }
        if specs.is_empty() {
            specs = sec.sources.iter().map(|s| (s.name.clone(), self.cfg.path(&s.path))).collect();
        }
        if specs.is_empty() {
            return Err(CliError::MissingKey("sft.sources".into()));
        }
        let mut m = Manifest::start("sft build");
        let labels = self.load_labels(kga, &mut m)?;
        let mut loaded = Vec::new();
        for (name, path) in &specs {
            m.input(path)?;
            loaded.push((name.as_str(), load_training(path)?));
        }
        let refs: Vec<(&str, &[QALPair])> = loaded.iter().map(|(n, p)| (*n, p.as_slice())).collect();
        let instruction = instruction
            .clone()
            .or_else(|| sec.instruction.clone())
            .unwrap_or_else(|| DEFAULT_INSTRUCTION.to_owned());
        let report = build_sft_dataset(&refs, &instruction, &labels, &out).map_err(run_err)?;
        m.settings(json!({"instruction": instruction})).counts(&report);
        self.finish(m, &out)
    }

    fn parse(&self, a: &ParseArgs) -> Result<(), CliError> {
        let sec = &self.cfg.parse;
        let out = req_path(&a.out, self.cfg, &sec.output, "parse.output")?;
        let dataset_path = req_path(&a.dataset, self.cfg, &sec.dataset, "parse.dataset")?;
        let beam = pick(&a.beam, &sec.beam, WEBQSP_BEAM);
        let kind = pick(&a.backend, &sec.backend, "file".to_owned());
        let mut m = Manifest::start("parse");
        m.input(&dataset_path)?;
        let dataset = load_dataset(&dataset_path).map_err(run_err)?;
        let seed = self.seed(None);

        let llm;
        let training;
        let backend: Box<dyn CandidateBackend + '_> = match kind.as_str() {
            "file" => {
                let p = req_path(&a.predictions, self.cfg, &sec.predictions, "parse.predictions")?;
                m.input(&p)?;
                Box::new(FileBackend::load(&p).map_err(run_err)?)
            }
            "llm" => {
                training = self.training(&a.training, &sec.training, "parse.training", &mut m)?;
                let labels = self.load_labels(&a.kg, &mut m)?;
                llm = self.llm(&a.llm)?;
                let mut b = FewShotBackend::new(llm.as_ref(), &training, &labels, seed).with_prompt(self.prompt("parse")?);
                if let Some(i) = &sec.instruction {
                    b = b.with_instruction(i);
                }
                Box::new(b)
            }
            other => return Err(CliError::Config(format!("parse.backend must be file or llm, got {other:?}"))),
        };

        let results = bounded_map(&dataset, self.concurrency(&a.llm), |item: &EvalItem| {
            match generate_candidates::<f64>(&item.qid, &item.question, beam, backend.as_ref()) {
                Err(CandidateError::MissingQid(q)) => {
                    tracing::warn!(qid = %q, "no predictions, writing an empty candidate list");
                    Ok(CandidateList::from_beams::<&str>(item.question.clone(), &[]))
                }
                other => other,
            }
        });
        let mut records = Vec::with_capacity(dataset.len());
        let mut without_parse = 0;
        for (item, res) in dataset.iter().zip(results) {
            let candidates = res.map_err(|e| run_err(format!("{}: {e}", item.qid)))?;
            without_parse += usize::from(!candidates.has_parseable());
            records.push(CandidateRecord {
                qid: item.qid.clone(),
                candidates,
            });
        }
        jsonl::write(&out, &records).map_err(run_err)?;
        m.settings(json!({"beam": beam, "backend": kind}))
            .seeds(json!({"seed": seed}))
            .counts(json!({"questions": records.len(), "without_parseable": without_parse}));
        self.finish(m, &out)
    }

    fn answer(&self, a: &AnswerArgs) -> Result<(), CliError> {
        let sec = &self.cfg.refine;
        let out = req_path(&a.out, self.cfg, &sec.output, "refine.output")?;
        let cand_path = req_path(&a.candidates, self.cfg, &sec.candidates, "refine.candidates")?;
        let oracle = a.oracle_entities || sec.oracle_entities.unwrap_or(false);
        let mut m = Manifest::start("answer");
        let kg = self.load_kg(&a.kg, &mut m)?;
        m.input(&cand_path)?;
        let records: Vec<CandidateRecord> = jsonl::read(&cand_path)
            .map_err(run_err)?
            .into_iter()
            .map(|(_, r)| r)
            .collect();

        let gold: HashMap<String, EvalItem> = if oracle {
            let p = req_path(&a.dataset, self.cfg, &sec.dataset, "refine.dataset")?;
            m.input(&p)?;
            load_dataset(&p).map_err(run_err)?.into_iter().map(|i| (i.qid.clone(), i)).collect()
        } else {
            HashMap::new()
        };

        let base_iri = self.cfg.kg.base_iri.clone().unwrap_or_else(|| DEFAULT_BASE_IRI.to_owned());
        let config = RefineConfig {
            k: pick(&a.topk, &sec.k, RefineConfig::default().k),
            combo_cap: pick(&a.combo_cap, &sec.combo_cap, RefineConfig::default().combo_cap),
            base_iri: base_iri.clone(),
        };
        let indices = self.indices(&kg, &a.aliases, &mut m)?;
        let endpoint = a.endpoint.clone().or_else(|| self.cfg.kg.endpoint.clone());
        let backend: Box<dyn SparqlBackend + '_> = match endpoint {
            Some(url) => Box::new(RemoteEndpoint::new(EndpointConfig {
                base_iri: base_iri.clone(),
                ..EndpointConfig::new(url)
            })),
            None => Box::new(InMemoryEngine::new(&kg, &base_iri)),
        };

        let results: Vec<(String, _)> = bounded_map(&records, DEFAULT_CONCURRENCY, |r: &CandidateRecord| {
            let list = match gold.get(&r.qid).and_then(|i| i.gold_form.as_ref()) {
                Some(g) => with_gold_entities(&r.candidates, g),
                None => r.candidates.clone(),
            };
            (r.qid.clone(), answer(&list, backend.as_ref(), &config, &indices))
        });
        write_results(&out, &results).map_err(run_err)?;
        let mut stages: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, r) in &results {
            *stages.entry(r.stage.as_str()).or_default() += 1;
        }
        m.settings(json!({
            "k": config.k,
            "combo_cap": config.combo_cap,
            "oracle_entities": oracle,
            "base_iri": config.base_iri,
        }))
        .counts(json!({"questions": results.len(), "stages": stages}));
        self.finish(m, &out)
    }

    fn indices(&self, kg: &KnowledgeGraph, aliases: &Option<PathBuf>, m: &mut Manifest) -> Result<RefineIndices, CliError> {
        let sec = &self.cfg.refine;
        let mut entities = match sec.entity_backend.as_deref().unwrap_or("lexical") {
            "lexical" => Similarity::entities(kg),
            "embedding" => {
                let client = EmbeddingClient::new(sec.embedding.clone().unwrap_or_default(), std::env::var(API_KEY_ENV).ok());
                let corpus = kg
                    .entities()
                    .into_iter()
                    .map(|id| (id.to_owned(), kg.label_or_id(id).to_owned()))
                    .collect();
                let index = EmbeddingIndex::build(client, corpus).map_err(run_err)?;
                Similarity::new(SimilarityBackend::Embedding(index))
            }
            other => {
                return Err(CliError::Config(format!(
                    "refine.entity_backend must be lexical or embedding, got {other:?}"
                )))
            }
        };
        if let Some(p) = opt_path(aliases, self.cfg, &sec.aliases) {
            m.input(&p)?;
            entities = entities.with_aliases(AliasTable::load(&p).map_err(run_err)?);
        }
        Ok(RefineIndices {
            entities,
            relations: Similarity::relations(kg),
        })
    }

    fn eval(&self, a: &EvalArgs) -> Result<(), CliError> {
        let sec = &self.cfg.eval;
        let dataset_path = req_path(&a.dataset, self.cfg, &sec.dataset, "eval.dataset")?;
        let results_path = req_path(&a.results, self.cfg, &sec.results, "eval.results")?;
        let out = req_path(&a.out, self.cfg, &sec.output, "eval.output")?;
        let mut m = Manifest::start("eval");
        m.input(&dataset_path)?.input(&results_path)?;
        let dataset = load_dataset(&dataset_path).map_err(run_err)?;
        let results = read_results(&results_path).map_err(run_err)?;
        let d = MetricsConfig::default();
        let metrics = MetricsConfig {
            both_empty_agree: sec.both_empty_agree.unwrap_or(d.both_empty_agree),
            skip_empty_gold_for_hits: sec.skip_empty_gold_for_hits.unwrap_or(d.skip_empty_gold_for_hits),
        };
        let report: Metrics = evaluate(&results, &dataset, &metrics).map_err(run_err)?;
        let text_path = out.with_extension("txt");
        write_report(&report, &out, &text_path).map_err(run_err)?;
        print!("{}", render_table(&report));
        m.settings(metrics).counts(json!({
            "items": report.count,
            "missing": report.missing,
            "f1": report.f1,
            "hits_at_1": report.hits_at_1,
            "accuracy": report.accuracy,
        }));
        m.output(&text_path)?;
        self.finish(m, &out)
    }
}

/// Training examples from either augmented-pair files or dataset records
/// (`qid`, `question`, `s_expression`, `answers`). Dataset items without a
/// usable gold form are skipped.
pub fn load_training(path: &Path) -> Result<Vec<QALPair>, CliError> {
    if let Ok(pairs) = read_pairs(path) {
        return Ok(pairs);
    }
    let items = load_dataset(path).map_err(run_err)?;
    let total = items.len();
    let pairs: Vec<QALPair> = items
        .into_iter()
        .filter_map(|i| {
            let form = i.gold_form.clone()?;
            let mut p = QALPair::new(i.question.clone(), form, Source::Original).with_meta("qid", &i.qid);
            p.answers = i.gold().into_iter().collect();
            Some(p)
        })
        .collect();
    if pairs.len() < total {
        tracing::warn!(path = %path.display(), skipped = total - pairs.len(), "training items without a usable form");
    }
    Ok(pairs)
}
