//! The N-run loop shared by every labeling task.

use crate::diff::DiffParseError;
use crate::gateway::{CallContext, CallKind, Gateway, GatewayError, ModelSpec, UsageRecord};
use crate::output::UnparseableOutput;
use crate::prompts::TemplateError;
use crate::repomap::RepoMapError;
use crate::types::{RunFlag, RunResult, Score, Task};
use crate::workspace::WorkspaceError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    RepoMap(#[from] RepoMapError),
    #[error("patch: {0}")]
    Patch(#[from] DiffParseError),
    #[error("prompt needs ~{estimate} tokens but the context limit is {limit}")]
    ContextBudgetExceeded { estimate: usize, limit: usize },
    #[error("runs must be at least 1")]
    NoRuns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub runs: usize,
    /// Run `i` uses seed `base_seed + i`; its parse retry uses `base_seed + runs + i`.
    pub base_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { runs: 3, base_seed: 0 }
    }
}

impl RunConfig {
    pub fn seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }

    pub fn retry_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add((self.runs + run) as u64)
    }
}

/// What a task-specific parser recovered from one completion.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Parsed {
    pub score: Score,
    pub rationale: String,
    pub candidate_solution: Option<bool>,
    pub counter_example: Option<String>,
    pub flags: Vec<RunFlag>,
}

#[derive(Debug, thiserror::Error)]
pub enum ParseFailure {
    #[error(transparent)]
    Unparseable(#[from] UnparseableOutput),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Usage records produced while parsing (auxiliary calls).
pub(crate) type ParseOutcome = (Result<Parsed, ParseFailure>, Vec<UsageRecord>);

/// Execute `cfg.runs` sequential runs of one prompt, each retried once on a parse failure.
pub(crate) fn execute_runs(
    gateway: &Gateway,
    spec: &ModelSpec,
    instance_id: &str,
    task: Task,
    prompt: &str,
    cfg: &RunConfig,
    mut parse: impl FnMut(&str, &CallContext) -> ParseOutcome,
) -> Result<Vec<RunResult>, PipelineError> {
    if cfg.runs == 0 {
        return Err(PipelineError::NoRuns);
    }
    let mut results = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let ctx = CallContext::new(instance_id, task, run, CallKind::Completion);
        let mut usage = Vec::new();
        let mut outcome = None;
        let mut raw = String::new();
        for seed in [cfg.seed(run), cfg.retry_seed(run)] {
            let completion = gateway.complete(spec, prompt, seed, &ctx)?;
            usage.push(completion.usage);
            raw = completion.text;
            let (parsed, aux_usage) = parse(&raw, &ctx);
            usage.extend(aux_usage);
            match parsed {
                Ok(p) => {
                    outcome = Some(p);
                    break;
                }
                Err(ParseFailure::Gateway(e)) => return Err(e.into()),
                Err(ParseFailure::Unparseable(_)) => {
                    log::warn!("{instance_id} {task} run {run}: unparseable output (seed {seed})");
                }
            }
        }
        results.push(match outcome {
            Some(p) => RunResult {
                run_index: run,
                task,
                score: Some(p.score),
                rationale: p.rationale,
                candidate_solution: p.candidate_solution,
                counter_example: p.counter_example,
                raw_output: raw,
                flags: p.flags,
                usage,
            },
            None => RunResult {
                run_index: run,
                task,
                score: None,
                rationale: String::new(),
                candidate_solution: None,
                counter_example: None,
                raw_output: raw,
                flags: vec![RunFlag::Unparseable],
                usage,
            },
        });
    }
    Ok(results)
}
