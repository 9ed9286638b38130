//! One check per acceptance criterion. Each returns a short summary on
//! success and the first violation on failure.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use kgaug_core::augment::arpe::{explore_paths, filter_question, group_by_pattern, run_arpe, ArpeConfig, ReasoningPattern};
use kgaug_core::augment::spqg::{run_spqg, SpqgConfig};
use kgaug_core::augment::spqr::{run_spqr, SpqrConfig};
use kgaug_core::augment::{normalize_question, write_pairs, QALPair, Source};
use kgaug_core::candidates::{build_sft_dataset, generate_candidates, CandidateList, FileBackend, DEFAULT_INSTRUCTION, WEBQSP_BEAM};
use kgaug_core::eval::{evaluate, f1, load_dataset, read_results, write_report, write_results, MetricsConfig};
use kgaug_core::kg::{KnowledgeGraph, Term};
use kgaug_core::lf::{interpret, parse, skeleton, to_sparql, SExpr};
use kgaug_core::llm::{templates, MockLlm};
use kgaug_core::refine::{answer, Phase, RefineConfig, Stage};
use kgaug_core::sparql::{execute_sparql, InMemoryEngine, DEFAULT_BASE_IRI};
use kgaug_core::{jsonl, Metrics, RefineIndices, Similarity};
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use serde::Deserialize;
use serde_json::{json, Value};

use super::*;

pub type Outcome = Result<String, String>;

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn fail<E: std::fmt::Display>(e: E) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

pub fn compiler_equivalence() -> Outcome {
    const CASES: u32 = 600;
    const PER_WORLD: usize = 2;
    let start = std::time::Instant::now();
    let (forms, non_empty, max_triples) = (Cell::new(0usize), Cell::new(0usize), Cell::new(0usize));
    runner(CASES)
        .run(&arb_world_and_forms(PER_WORLD), |(w, fs)| {
            if w.triples.len() > 1000 {
                return Err(fail(format!("{} triples", w.triples.len())));
            }
            max_triples.set(max_triples.get().max(w.triples.len()));
            let kg = w.kg();
            let engine = InMemoryEngine::new(&kg, DEFAULT_BASE_IRI);
            for f in &fs {
                let direct = interpret(f, &kg).map_err(|e| fail(format!("{f}: {e}")))?.sorted();
                let q = to_sparql(f, DEFAULT_BASE_IRI).map_err(|e| fail(format!("{f}: {e}")))?;
                let compiled = execute_sparql(&q, &engine).map_err(|e| fail(format!("{f}: {e}")))?.sorted();
                if direct != compiled {
                    return Err(fail(format!("{f}\ninterpret: {:?}\nsparql: {:?}\n{}", direct.values(), compiled.values(), q.text)));
                }
                forms.set(forms.get() + 1);
                non_empty.set(non_empty.get() + usize::from(!direct.is_empty()));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let (forms, non_empty, max_triples) = (forms.get(), non_empty.get(), max_triples.get());
    if forms < 1000 {
        return Err(format!("only {forms} forms checked"));
    }
    if start.elapsed().as_secs() >= 60 {
        return Err(format!("took {:?}", start.elapsed()));
    }
    Ok(format!("{forms} forms, {non_empty} with answers, graphs up to {max_triples} triples"))
}

pub fn parser_roundtrip() -> Outcome {
    let n = Cell::new(0usize);
    runner(1000)
        .run(&syntax_forms(), |f| {
            let text = f.serialize();
            let back = parse(&text).map_err(|e| fail(format!("{text:?}: {e}")))?;
            if back != f {
                return Err(fail(format!("{text:?} parsed as {back:?}, expected {f:?}")));
            }
            n.set(n.get() + 1);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let corpus = fs::read_to_string(fixture("forms.txt")).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = corpus.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != 200 {
        return Err(format!("corpus has {} forms", lines.len()));
    }
    let mut normalized = 0;
    for line in &lines {
        let f = parse(line).map_err(|e| format!("{line}: {e}"))?;
        let text = f.serialize();
        let back = parse(&text).map_err(|e| format!("{text}: {e}"))?;
        if back != f || back.serialize() != text {
            return Err(format!("{line} does not survive {text}"));
        }
        normalized += usize::from(text != *line);
    }
    let n = n.get();
    Ok(format!("{n} generated forms, {} corpus forms ({normalized} normalized)", lines.len()))
}

const SKELETON_TOKENS: [&str; 11] = ["JOIN", "R", "AND", "COUNT", "ARGMAX", "ARGMIN", "lt", "le", "gt", "ge", "[]"];

pub fn skeleton_tokens(s: &str) -> Vec<String> {
    s.replace(['(', ')'], " ").split_whitespace().map(str::to_owned).collect()
}

pub fn skeleton_check() -> Outcome {
    let f = parse("(JOIN (R people.marriage.spouse) m.01x)").map_err(|e| e.to_string())?;
    let s = skeleton(&f);
    if s.as_str() != "(JOIN (R []) [])" {
        return Err(format!("got {s}"));
    }
    let n = Cell::new(0usize);
    runner(1000)
        .run(&syntax_forms(), |f| {
            let s = skeleton(&f);
            for t in skeleton_tokens(s.as_str()) {
                if !SKELETON_TOKENS.contains(&t.as_str()) {
                    return Err(fail(format!("{f}: skeleton {s} has token {t:?}")));
                }
            }
            if !vocabulary(&s.template()).is_empty() {
                return Err(fail(format!("{s} keeps names")));
            }
            n.set(n.get() + 1);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let n = n.get();
    Ok(format!("exact example plus {n} fuzzed forms"))
}

fn relations_file() -> Vec<String> {
    fs::read_to_string(fixture("toy/relations.txt"))
        .expect("relations fixture")
        .lines()
        .map(str::to_owned)
        .collect()
}

fn executes_non_empty(f: &SExpr, kg: &KnowledgeGraph) -> bool {
    let engine = InMemoryEngine::new(kg, DEFAULT_BASE_IRI);
    to_sparql(f, DEFAULT_BASE_IRI)
        .ok()
        .and_then(|q| execute_sparql(&q, &engine).ok())
        .is_some_and(|a| !a.is_empty())
}

fn pairs_json(p: &[QALPair]) -> String {
    serde_json::to_string(p).expect("pairs serialize")
}

pub fn spqg_suite() -> Outcome {
    let kg = toy_kg();
    let relations = relations_file();
    let surviving = relations.iter().filter(|r| kg.relation_count(r) > 0).count();
    let mut sizes = Vec::new();
    for k in [1, 3, 5] {
        let config = SpqgConfig {
            k,
            seed: 5,
            ..SpqgConfig::default()
        };
        let a = run_spqg(&kg, &relations, &config, &templates::spqg(), &MockLlm::new());
        let b = run_spqg(&kg, &relations, &config, &templates::spqg(), &MockLlm::new());
        if pairs_json(&a.pairs) != pairs_json(&b.pairs) {
            return Err(format!("k={k}: runs differ"));
        }
        if a.pairs.len() != surviving * k {
            return Err(format!("k={k}: {} pairs for {surviving} relations", a.pairs.len()));
        }
        for p in &a.pairs {
            if skeleton(&p.logical_form).as_str() != "(JOIN (R []) [])" {
                return Err(format!("{}: not single-hop", p.logical_form));
            }
            if !executes_non_empty(&p.logical_form, &kg) {
                return Err(format!("{}: empty answer", p.logical_form));
            }
            let subject = p.meta.get("subject").ok_or("pair without subject")?;
            if !p.question.contains(kg.label_or_id(subject)) || p.question.contains("[SUBJECT]") {
                return Err(format!("bad question {:?} for {subject}", p.question));
            }
        }
        sizes.push(a.pairs.len());
    }
    Ok(format!("{surviving} surviving relations, |D| = {sizes:?} for k = 1, 3, 5"))
}

pub fn spqr_suite() -> Outcome {
    let training = toy_pairs("toy/train.jsonl");
    let by_qid: BTreeMap<&str, &QALPair> = training.iter().map(|p| (p.qid().expect("qid"), p)).collect();
    let mut sizes = Vec::new();
    for rw in [1, 3] {
        let config = SpqrConfig {
            rw,
            ..SpqrConfig::default()
        };
        let out = run_spqr(&training, &config, &templates::spqr(), &MockLlm::new());
        if out.pairs.len() > rw * training.len() {
            return Err(format!("rw={rw}: {} pairs", out.pairs.len()));
        }
        let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        let mut all = HashSet::new();
        for p in &out.pairs {
            let qid = p.qid().ok_or("rewrite without qid")?;
            let src = by_qid.get(qid).ok_or(format!("unknown qid {qid}"))?;
            if p.logical_form.serialize() != src.logical_form.serialize() || p.source != Source::Spqr {
                return Err(format!("{qid}: form changed"));
            }
            let norm = normalize_question(&p.question);
            if norm == normalize_question(&src.question) {
                return Err(format!("{qid}: rewrite equals original"));
            }
            groups.entry(qid).or_default().push(norm.clone());
            all.insert(norm);
        }
        for (qid, g) in &groups {
            if g.iter().collect::<HashSet<_>>().len() != g.len() {
                return Err(format!("{qid}: repeated paraphrase"));
            }
        }
        if all.len() != out.pairs.len() {
            return Err(format!("rw={rw}: paraphrases repeat across items"));
        }
        sizes.push(out.pairs.len());
    }
    Ok(format!("{} items, {sizes:?} rewrites for rw = 1, 3", training.len()))
}

/// Twenty forms with their grouping worked out by hand.
pub fn hand_grouped() -> (Vec<QALPair>, Vec<(&'static str, Vec<usize>)>) {
    let forms = [
        "(JOIN (R people.person.place_of_birth) m.p00)",
        "(AND (JOIN people.person.profession m.job1) (JOIN people.person.nationality m.c2))",
        "(JOIN (R location.location.containedby) (JOIN (R people.person.place_of_birth) m.p07))",
        "(JOIN film.film.directed_by m.p09)",
        "(JOIN (R people.person.nationality) m.p05)",
        "(JOIN (R location.country.capital) (JOIN (R people.person.nationality) m.p20))",
        "(ARGMAX (JOIN film.film.directed_by m.p09) film.film.release_year)",
        "(JOIN (R people.person.spouse) m.p14)",
        "(AND (JOIN people.person.profession m.job0) (JOIN people.person.nationality m.c1))",
        "(JOIN film.film.starring m.p11)",
        "(JOIN (R film.film.directed_by) m.f03)",
        "(JOIN (R location.location.containedby) (JOIN (R people.person.place_of_birth) m.p10))",
        "(JOIN (R film.film.starring) m.f05)",
        "(JOIN film.film.directed_by m.p13)",
        "(AND (JOIN people.person.profession m.job3) (JOIN people.person.nationality m.c0))",
        "(JOIN (R people.person.profession) m.p02)",
        "(JOIN (R location.country.capital) (JOIN (R people.person.nationality) m.p21))",
        "(AND (JOIN people.person.profession m.job2) (JOIN people.person.nationality m.c3))",
        "(JOIN (R people.person.spouse) m.p30)",
        "(JOIN (R location.location.containedby) (JOIN (R people.person.place_of_birth) m.p33))",
    ];
    let pairs = forms
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut p = QALPair::new(format!("q{i}"), parse(f).expect("hand form"), Source::Original);
            p.answers = vec![format!("a{}", i % 3)];
            p
        })
        .collect();
    let groups = vec![
        ("(JOIN (R []) [])", vec![0, 4, 7, 10, 12, 15, 18]),
        ("(JOIN (R []) (JOIN (R []) []))", vec![2, 5, 11, 16, 19]),
        ("(AND (JOIN [] []) (JOIN [] []))", vec![1, 8, 14, 17]),
        ("(JOIN [] [])", vec![3, 9, 13]),
        ("(ARGMAX (JOIN [] []) [])", vec![6]),
    ];
    (pairs, groups)
}

/// Every (relations, keys) path for the three path shapes, by exhaustive
/// search over the triples. Nodes on a path are pairwise distinct.
pub fn brute_force_paths(shape: &str, answer: &str, kg: &KnowledgeGraph) -> BTreeSet<(Vec<String>, Vec<String>)> {
    let edges: Vec<(&str, &str, &str)> = kg
        .triples()
        .iter()
        .map(|t| (t.subject.as_str(), t.relation.as_str(), t.object.as_str()))
        .collect();
    let mut out = BTreeSet::new();
    match shape {
        "(JOIN (R []) [])" => {
            for &(s, r, o) in &edges {
                if o == answer && s != answer {
                    out.insert((vec![r.to_owned()], vec![s.to_owned()]));
                }
            }
        }
        "(JOIN (R []) (JOIN (R []) []))" => {
            for &(x, r1, o) in &edges {
                if o != answer || x == answer {
                    continue;
                }
                for &(k, r2, o2) in &edges {
                    if o2 == x && k != x && k != answer {
                        out.insert((vec![r1.to_owned(), r2.to_owned()], vec![k.to_owned()]));
                    }
                }
            }
        }
        "(AND (JOIN [] []) (JOIN [] []))" => {
            for &(s1, r1, k1) in &edges {
                if s1 != answer || k1 == answer {
                    continue;
                }
                for &(s2, r2, k2) in &edges {
                    if s2 == answer && k2 != answer && k2 != k1 {
                        out.insert((vec![r1.to_owned(), r2.to_owned()], vec![k1.to_owned(), k2.to_owned()]));
                    }
                }
            }
        }
        other => panic!("no oracle for {other}"),
    }
    out
}

pub const PATH_SHAPES: [&str; 3] = ["(JOIN (R []) [])", "(JOIN (R []) (JOIN (R []) []))", "(AND (JOIN [] []) (JOIN [] []))"];

pub fn pattern(shape: &str) -> ReasoningPattern {
    let f = parse(shape).expect("shape parses");
    ReasoningPattern::from_skeleton(&skeleton(&f)).expect("plannable")
}

pub struct FilterCase {
    pub reject: bool,
    pub answer: String,
    pub question: String,
}

pub fn filter_corpus() -> Vec<FilterCase> {
    fs::read_to_string(fixture("filter_corpus.tsv"))
        .expect("filter corpus")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let mut parts = l.splitn(3, '\t');
            let (e, a, q) = (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());
            FilterCase {
                reject: e == "reject",
                answer: a.to_owned(),
                question: q.to_owned(),
            }
        })
        .collect()
}

pub fn arpe_suite() -> Outcome {
    let (pairs, oracle) = hand_grouped();
    let clusters = group_by_pattern(&pairs, 5);
    let got: Vec<(&str, Vec<usize>)> = clusters.iter().map(|c| (c.skeleton.as_str(), c.members.clone())).collect();
    if got != oracle {
        return Err(format!("grouping {got:?}"));
    }

    let kg = toy_kg();
    let mut explored = 0;
    for shape in PATH_SHAPES {
        let p = pattern(shape);
        for answer in kg.entities() {
            let all = brute_force_paths(shape, answer, &kg);
            for (n, seed) in [(1, 0), (3, 1), (10, 2)] {
                let paths = explore_paths(&p, &Term::entity(answer), n, &kg, seed);
                if paths.len() > n {
                    return Err(format!("{shape} {answer}: {} paths for n={n}", paths.len()));
                }
                for path in &paths {
                    let key = (
                        path.relations().iter().map(|s| s.to_string()).collect(),
                        path.keys(&p).map(|t| t.as_str().to_owned()).collect(),
                    );
                    if !all.contains(&key) {
                        return Err(format!("{shape} {answer}: {key:?} is not a graph path"));
                    }
                }
                explored += paths.len();
            }
        }
    }

    let training = toy_pairs("toy/train.jsonl");
    let out = run_arpe(&training, &kg, &ArpeConfig::default(), &templates::arpe(), &MockLlm::new());
    let mut shapes = BTreeSet::new();
    for p in &out.pairs {
        let a = kg.resolve(&p.answers[0]).ok_or("unknown answer")?;
        let got = interpret(&p.logical_form, &kg).map_err(|e| e.to_string())?;
        if !got.contains(&a) {
            return Err(format!("{}: answer {a} not derived", p.logical_form));
        }
        shapes.insert(skeleton(&p.logical_form));
    }
    if !shapes.iter().any(|s| s.as_str() == PATH_SHAPES[1]) || !shapes.iter().any(|s| s.as_str() == PATH_SHAPES[0]) {
        return Err(format!("planted patterns missing from output: {shapes:?}"));
    }

    let corpus = filter_corpus();
    let bad = corpus.iter().filter(|c| c.reject).count();
    let good = corpus.len() - bad;
    if bad != 30 || good != 30 {
        return Err(format!("corpus sizes {bad}/{good}"));
    }
    for c in &corpus {
        if filter_question(&c.question, &c.answer) == c.reject {
            return Err(format!("filter wrong on {:?}", c.question));
        }
    }
    Ok(format!(
        "grouping exact, {explored} explored paths within brute force, {} emitted pairs valid, filter 30/30 + 30/30",
        out.pairs.len()
    ))
}

#[derive(Deserialize)]
pub struct RefineItem {
    pub qid: String,
    pub entity: String,
    pub misspelled: String,
    pub beams: Vec<String>,
    pub answers: Vec<String>,
}

pub fn refine_items() -> Vec<RefineItem> {
    jsonl::read(&fixture("refine_items.jsonl"))
        .expect("refinement fixture")
        .into_iter()
        .map(|(_, i)| i)
        .collect()
}

fn trigram_set(s: &str) -> BTreeSet<Vec<char>> {
    let padded: Vec<char> = format!(" {} ", s.to_lowercase()).chars().collect();
    padded.windows(3).map(<[char]>::to_vec).collect()
}

/// Jaccard similarity of character trigrams, computed from scratch.
pub fn oracle_similarity(a: &str, b: &str) -> f64 {
    let (x, y) = (trigram_set(a), trigram_set(b));
    x.intersection(&y).count() as f64 / x.union(&y).count() as f64
}

pub const RECOVERY_THRESHOLD: f64 = 0.45;

pub fn refinement_recovery() -> Outcome {
    let kg = toy_kg();
    let items = refine_items();
    if items.len() != 40 {
        return Err(format!("{} items", items.len()));
    }
    for it in &items {
        let mut scored: Vec<(f64, &str)> = kg.labels().iter().map(|(id, l)| (oracle_similarity(&it.misspelled, l), id.as_str())).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        if scored[0].1 != it.entity || scored[0].0 < RECOVERY_THRESHOLD || scored[0].0 == scored[1].0 {
            return Err(format!("{}: fixture property fails for {:?}", it.qid, it.misspelled));
        }
    }

    let engine = InMemoryEngine::new(&kg, DEFAULT_BASE_IRI);
    let indices = RefineIndices {
        entities: Similarity::entities(&kg),
        relations: Similarity::relations(&kg),
    };
    let config = RefineConfig::default();
    let (mut recovered, mut exact) = (0, 0);
    for it in &items {
        let c: CandidateList<f64> = CandidateList::from_beams("", &it.beams);
        let r = answer(&c, &engine, &config, &indices);
        if r.stage == Stage::EntityRefined && !r.answers.is_empty() {
            if r.trace.iter().any(|e| e.phase == Phase::Relation) {
                return Err(format!("{}: relation stage ran after entity success", it.qid));
            }
            recovered += 1;
            exact += usize::from(r.answers.values() == it.answers);
        }
    }
    if recovered * 100 < items.len() * 95 {
        return Err(format!("recovered {recovered}/{}", items.len()));
    }
    Ok(format!("{recovered}/{} entity-refined, {exact} with the gold answers", items.len()))
}

fn fraction(v: &Value) -> f64 {
    match v {
        Value::String(s) => {
            let (n, d) = s.split_once('/').expect("n/d");
            n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap()
        }
        other => other.as_f64().expect("number"),
    }
}

pub fn metrics_check() -> Outcome {
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    if f1::<f64>(&set(&["a", "b"]), &set(&["b", "c"])) != 0.5 {
        return Err("f1({a,b},{b,c}) != 0.5".into());
    }
    let dir = fixture("metrics");
    let dataset = load_dataset(&dir.join("dataset.jsonl")).map_err(|e| e.to_string())?;
    let results = read_results(&dir.join("results.jsonl")).map_err(|e| e.to_string())?;
    let expected: Value = serde_json::from_str(&fs::read_to_string(dir.join("expected.json")).unwrap()).unwrap();
    let report: Metrics = evaluate(&results, &dataset, &MetricsConfig::default()).map_err(|e| e.to_string())?;
    let want = expected["items"].as_array().unwrap();
    if want.len() != 20 || report.items.len() != 20 {
        return Err(format!("{} items", report.items.len()));
    }
    for (got, w) in report.items.iter().zip(want) {
        let triple = (fraction(&w["f1"]), fraction(&w["hit1"]), fraction(&w["acc"]));
        if got.qid != w["qid"] || (got.f1, got.hit1, got.acc) != triple {
            return Err(format!("{}: got {:?}, hand {:?}", got.qid, (got.f1, got.hit1, got.acc), triple));
        }
    }
    if report.hits_at_1 != fraction(&expected["hits_at_1"]) || report.accuracy != fraction(&expected["accuracy"]) {
        return Err(format!("aggregates {} {}", report.hits_at_1, report.accuracy));
    }
    if (report.f1 - fraction(&expected["f1"])).abs() > 1e-12 {
        return Err(format!("F1 {} vs hand {}", report.f1, expected["f1"]));
    }
    let n = report.items.len() as f64;
    let means = [
        report.items.iter().map(|i| i.f1).sum::<f64>() / n - report.f1,
        report.items.iter().map(|i| i.hit1).sum::<f64>() / n - report.hits_at_1,
        report.items.iter().map(|i| i.acc).sum::<f64>() / n - report.accuracy,
    ];
    if means.iter().any(|d| d.abs() > 1e-12) {
        return Err(format!("aggregate is not the mean: {means:?}"));
    }
    if report.missing != expected["missing"] || report.empty_gold != expected["empty_gold"] {
        return Err("missing/empty-gold counts".into());
    }
    Ok(format!("20 items exact, F1 {:.4} Hits@1 {:.4} Acc {:.4}", report.f1, report.hits_at_1, report.accuracy))
}

/// augment, sft, parse (file backend), answer, eval; all artifacts go to `dir`.
pub fn run_toy_pipeline(dir: &Path, seed: u64) -> Result<Metrics, String> {
    let kg = toy_kg();
    let llm = MockLlm::new();
    let training = toy_pairs("toy/train.jsonl");
    let e = |e: &dyn std::fmt::Display| e.to_string();

    let spqg = run_spqg(&kg, &relations_file(), &SpqgConfig { k: 3, seed, ..SpqgConfig::default() }, &templates::spqg(), &llm);
    write_pairs(&dir.join("spqg.jsonl"), &spqg.pairs).map_err(|x| e(&x))?;
    let spqr = run_spqr(&training, &SpqrConfig { rw: 2, ..SpqrConfig::default() }, &templates::spqr(), &llm);
    write_pairs(&dir.join("spqr.jsonl"), &spqr.pairs).map_err(|x| e(&x))?;
    let arpe = run_arpe(&training, &kg, &ArpeConfig { seed, ..ArpeConfig::default() }, &templates::arpe(), &llm);
    write_pairs(&dir.join("arpe.jsonl"), &arpe.pairs).map_err(|x| e(&x))?;
    let sources: [(&str, &[QALPair]); 4] = [
        ("original", &training),
        ("spqg", &spqg.pairs),
        ("spqr", &spqr.pairs),
        ("arpe", &arpe.pairs),
    ];
    build_sft_dataset(&sources, DEFAULT_INSTRUCTION, kg.labels(), &dir.join("sft.jsonl")).map_err(|x| e(&x))?;

    let dataset = load_dataset(&fixture("toy/test.jsonl")).map_err(|x| e(&x))?;
    let backend = FileBackend::load(&fixture("toy/predictions.jsonl")).map_err(|x| e(&x))?;
    let mut lists = Vec::new();
    for item in &dataset {
        let c = generate_candidates::<f64>(&item.qid, &item.question, WEBQSP_BEAM, &backend).map_err(|x| e(&x))?;
        lists.push((item.qid.clone(), c));
    }
    let records = lists.iter().map(|(q, c)| json!({"qid": q, "candidates": c}));
    jsonl::write(&dir.join("candidates.jsonl"), records).map_err(|x| e(&x))?;

    let engine = InMemoryEngine::new(&kg, DEFAULT_BASE_IRI);
    let indices = RefineIndices {
        entities: Similarity::entities(&kg),
        relations: Similarity::relations(&kg),
    };
    let results: Vec<_> = lists
        .iter()
        .map(|(q, c)| (q.clone(), answer(c, &engine, &RefineConfig::default(), &indices)))
        .collect();
    write_results(&dir.join("results.jsonl"), &results).map_err(|x| e(&x))?;
    let report: Metrics = evaluate(&results, &dataset, &MetricsConfig::default()).map_err(|x| e(&x))?;
    write_report(&report, &dir.join("report.json"), &dir.join("report.txt")).map_err(|x| e(&x))?;
    Ok(report)
}

pub fn end_to_end() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let report = run_toy_pipeline(a.path(), 17)?;
    run_toy_pipeline(b.path(), 17)?;
    let mut names: Vec<_> = fs::read_dir(a.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in &names {
        let x = fs::read(a.path().join(name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.path().join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{} differs between runs", name.to_string_lossy()));
        }
    }
    if report.count != 10 || report.f1 != 1.0 {
        return Err(format!("{} questions, F1 {}", report.count, report.f1));
    }
    Ok(format!("{} artifacts byte-identical, F1 {:.1} on {} questions", names.len(), report.f1, report.count))
}
