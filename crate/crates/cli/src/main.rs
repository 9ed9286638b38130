//! `kgaug`: every pipeline stage as a subcommand sharing one config file.

mod commands;
mod config;
mod error;
mod manifest;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kgaug_core::augment::spqg::Pairing;
use tracing_subscriber::EnvFilter;

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "kgaug", version, about = "Augment, parse, refine and evaluate KGQA logical forms")]
pub struct Cli {
    /// JSON config file with kg/llm/augment/sft/parse/refine/eval sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Knowledge-graph utilities.
    Kg {
        #[command(subcommand)]
        cmd: KgCmd,
    },
    /// Synthetic training data.
    Augment {
        #[command(subcommand)]
        cmd: AugmentCmd,
    },
    /// Instruction-tuning data.
    Sft {
        #[command(subcommand)]
        cmd: SftCmd,
    },
    /// Candidate logical forms for each dataset question.
    Parse(ParseArgs),
    /// Refine and execute candidates.
    Answer(AnswerArgs),
    /// Score results against gold answers.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct KgArgs {
    /// Triples file: subject, relation, object, kind (e|l), tab-separated.
    #[arg(long)]
    pub triples: Option<PathBuf>,
    /// Labels file: id, label, tab-separated.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LlmArgs {
    /// `mock` (offline, default) or `openai`.
    #[arg(long)]
    pub llm: Option<String>,
    /// Directory of canned replies for the mock backend.
    #[arg(long)]
    pub mock_dir: Option<PathBuf>,
    #[arg(long)]
    pub concurrency: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum KgCmd {
    Stats {
        #[command(flatten)]
        kg: KgArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AugmentCmd {
    /// Single-hop questions from relation templates.
    Spqg {
        #[command(flatten)]
        kg: KgArgs,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long)]
        k: Option<usize>,
        /// File with one relation id per line (default: every relation).
        #[arg(long)]
        relations: Option<PathBuf>,
        #[arg(long, value_parser = parse_pairing)]
        pairing: Option<Pairing>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paraphrases of training questions.
    Spqr {
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long)]
        training: Option<PathBuf>,
        #[arg(long)]
        rw: Option<usize>,
        /// Only rewrite questions of the R most frequent skeletons.
        #[arg(long)]
        top_patterns: Option<usize>,
        #[arg(long)]
        length_guard: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reverse exploration from training answers.
    Arpe {
        #[command(flatten)]
        kg: KgArgs,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long)]
        training: Option<PathBuf>,
        #[arg(long)]
        patterns: Option<usize>,
        #[arg(long)]
        paths_per_answer: Option<usize>,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        fan_out: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SftCmd {
    Build {
        #[command(flatten)]
        kg: KgArgs,
        /// `name=path`; repeatable. Files hold pairs or dataset records.
        #[arg(long = "source")]
        sources: Vec<String>,
        #[arg(long)]
        instruction: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[command(flatten)]
    pub kg: KgArgs,
    #[command(flatten)]
    pub llm: LlmArgs,
    #[arg(long)]
    pub beam: Option<usize>,
    /// `file` or `llm`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Exemplar pool for the few-shot backend.
    #[arg(long)]
    pub training: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnswerArgs {
    #[command(flatten)]
    pub kg: KgArgs,
    #[arg(long)]
    pub topk: Option<usize>,
    #[arg(long)]
    pub combo_cap: Option<usize>,
    /// Substitute gold entities before refinement.
    #[arg(long)]
    pub oracle_entities: bool,
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Needed with --oracle-entities.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Report JSON; the text table goes next to it with a `.txt` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_pairing(s: &str) -> Result<Pairing, String> {
    match s {
        "zip" => Ok(Pairing::Zip),
        "cartesian" => Ok(Pairing::Cartesian),
        other => Err(format!("unknown pairing {other:?} (zip or cartesian)")),
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = Config::load(cli.config.as_deref())?;
    commands::dispatch(cli, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::Usage(e.to_string().lines().next().unwrap_or_default().to_owned());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
