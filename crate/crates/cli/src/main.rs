//! `swelabel`: label benchmark instances, evaluate labels, project costs.

mod eval;
mod label;
mod tools;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use swelabel_core::Task;

/// Failure classes mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, templates, pricing or backend configuration.
    Config(anyhow::Error),
    /// Unreadable or malformed input data.
    Data(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn config_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Config(e.into())
}

pub fn data_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Data(e.into())
}

#[derive(Parser)]
#[command(name = "swelabel", version, about = "Automated clarity, coverage and difficulty labels for SWE-bench-style datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label every instance of a dataset.
    Label(LabelArgs),
    /// Evaluate labels against references, scaffolds or each other.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Project labeling cost from a usage log.
    Cost(CostArgs),
    /// Render the repository map of a checkout.
    Repomap(RepomapArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Ica,
    Tca,
    Difficulty,
    All,
}

impl TaskArg {
    pub fn tasks(self) -> Vec<Task> {
        match self {
            TaskArg::Ica => vec![Task::Ica],
            TaskArg::Tca => vec![Task::Tca],
            TaskArg::Difficulty => vec![Task::Difficulty],
            TaskArg::All => vec![Task::Ica, Task::Tca, Task::Difficulty],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabeledTask {
    Ica,
    Tca,
    Difficulty,
}

impl From<LabeledTask> for Task {
    fn from(t: LabeledTask) -> Task {
        match t {
            LabeledTask::Ica => Task::Ica,
            LabeledTask::Tca => Task::Tca,
            LabeledTask::Difficulty => Task::Difficulty,
        }
    }
}

/// Model selection shared by `label` and `eval similarity`.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model id sent to the endpoint.
    #[arg(long, default_value = "stub")]
    pub model: String,
    /// Base URL of an OpenAI-compatible API, or `stub` for the deterministic backend.
    #[arg(long, default_value = "stub")]
    pub endpoint: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    pub api_key_env: String,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 4096)]
    pub max_output_tokens: u32,
    /// Prompt budget in tokens.
    #[arg(long, default_value_t = 128_000)]
    pub context_limit: usize,
    /// JSON object mapping stub keys to canned replies.
    #[arg(long)]
    pub stub_overrides: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    /// Line-delimited JSON dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model that extracts a score from unparseable replies; defaults to `--model`.
    #[arg(long)]
    pub aux_model: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for labels.jsonl, usage.jsonl and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Checkout cache; defaults to `<out>/repos`.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Directory of local `<owner>__<name>` clones.
    #[arg(long)]
    pub mirror: Option<PathBuf>,
    /// Clone URL prefix used when no mirror is given.
    #[arg(long, default_value = "https://github.com")]
    pub remote: String,
    #[arg(long, default_value_t = swelabel_core::repomap::DEFAULT_MAP_BUDGET)]
    pub map_budget: usize,
    /// Universal-ctags binary for definitions; the builtin tagger otherwise.
    #[arg(long)]
    pub ctags: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 4)]
    pub parallel: usize,
    /// Directory of `<template>.txt` overrides (and `checklist.txt`).
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    Accuracy(eval::AccuracyArgs),
    Agreement(eval::AgreementArgs),
    Similarity(eval::SimilarityArgs),
    Scaffold(eval::ScaffoldArgs),
}

#[derive(Args, Debug)]
pub struct CostArgs {
    /// usage.jsonl written by `label`.
    #[arg(long)]
    pub usage: Option<PathBuf>,
    /// `table2` or a pricing TOML file.
    #[arg(long, default_value = "table2")]
    pub pricing: String,
    /// Number of instances to project for.
    #[arg(long, default_value_t = 1000)]
    pub n: u64,
    /// Comma-separated model ids; defaults to the models in the usage log.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Restrict the usage medians to one task.
    #[arg(long, value_enum)]
    pub task: Option<LabeledTask>,
    /// Per-instance input tokens, replacing the usage-log median.
    #[arg(long)]
    pub input_median: Option<f64>,
    /// Per-instance output tokens, replacing the usage-log median.
    #[arg(long)]
    pub output_median: Option<f64>,
}

#[derive(Args, Debug)]
pub struct RepomapArgs {
    #[arg(long)]
    pub repo: PathBuf,
    #[arg(long, default_value_t = swelabel_core::repomap::DEFAULT_MAP_BUDGET)]
    pub budget: usize,
    /// Comma-separated files to personalize the ranking towards.
    #[arg(long, value_delimiter = ',')]
    pub focus: Vec<String>,
    /// Free text whose identifiers get the mention boost.
    #[arg(long)]
    pub mention: Option<String>,
    #[arg(long)]
    pub ctags: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are configuration errors; help and version are not errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Label(args) => label::run(args),
        Command::Eval(EvalCommand::Accuracy(a)) => eval::accuracy(a),
        Command::Eval(EvalCommand::Agreement(a)) => eval::agreement(a),
        Command::Eval(EvalCommand::Similarity(a)) => eval::similarity(a),
        Command::Eval(EvalCommand::Scaffold(a)) => eval::scaffold(a),
        Command::Cost(args) => tools::cost(args),
        Command::Repomap(args) => tools::repomap(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Config(err) | CliError::Data(err)) = &e;
            eprintln!("error: {err:#}");
            ExitCode::from(e.code())
        }
    }
}
