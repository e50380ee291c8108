//! Test coverage and difficulty assessment: the issue, both patches, the files they
//! touch and a repository map, judged N times.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;

use crate::diff::{parse_patch, patch_files};
use crate::gateway::{CallContext, CallKind, Gateway, ModelSpec, UsageRecord};
use crate::output::{parse_block, parse_score_value, UnparseableOutput};
use crate::pipeline::{execute_runs, ParseFailure, ParseOutcome, Parsed, PipelineError, RunConfig};
use crate::preprocess::{clean_issue, CleanIssue};
use crate::prompts::{PromptSet, TemplateError};
use crate::repomap::{mentioned_idents, MapArtifacts, RepoMapText, RepoMapper, TokenCounter};
use crate::types::{Instance, RunFlag, RunResult, Score, Task};
use crate::workspace::{checkout_workspace, RepoSource, Workspace};

/// Share of the context limit the focus files may take before they are excerpted.
pub const FOCUS_SHARE: f64 = 0.6;
/// Lines of context kept around each hunk when excerpting.
pub const HUNK_CONTEXT: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcaOutcome {
    pub score: Score,
    pub rationale: String,
    pub counter_example: Option<String>,
    /// The score came from the auxiliary model.
    pub via_auxiliary: bool,
}

/// Files touched by the gold or test patch, read at the base commit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FocusSet {
    /// `(path, text)` in patch order.
    pub files: Vec<(String, String)>,
    /// Touched paths that do not exist at the base commit.
    pub missing: Vec<String>,
}

impl FocusSet {
    pub fn paths(&self) -> Vec<String> {
        self.files.iter().map(|(p, _)| p.clone()).collect()
    }
}

fn touched_paths(instance: &Instance) -> Result<Vec<String>, PipelineError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in patch_files(&instance.gold_patch)?.into_iter().chain(patch_files(&instance.test_patch)?) {
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn collect_focus(instance: &Instance, ws: &Workspace) -> Result<FocusSet, PipelineError> {
    let mut focus = FocusSet::default();
    for path in touched_paths(instance)? {
        match ws.read_file(&path) {
            Some(text) => focus.files.push((path, text)),
            None => focus.missing.push(path),
        }
    }
    Ok(focus)
}

/// Pre-image line ranges `(start, len)` of every hunk, per file.
fn hunk_ranges(instance: &Instance) -> Result<BTreeMap<String, Vec<(usize, usize)>>, PipelineError> {
    let mut out: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for patch in [&instance.gold_patch, &instance.test_patch] {
        for fp in parse_patch(patch)? {
            if let Some(path) = fp.old_path.as_deref().or(fp.target()) {
                out.entry(path.to_string()).or_default().extend(fp.hunks.iter().map(|h| (h.old_start, h.old_len)));
            }
        }
    }
    Ok(out)
}

/// Keep only the lines within `context` of a hunk, with `...` between kept regions.
pub fn excerpt(text: &str, hunks: &[(usize, usize)], context: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    if lines.is_empty() {
        return String::new();
    }
    let mut regions: Vec<(usize, usize)> = hunks
        .iter()
        .map(|&(start, len)| {
            let first = start.max(1) - 1;
            let last = (first + len.max(1) - 1).min(lines.len() - 1);
            (first.saturating_sub(context), (last + context).min(lines.len() - 1))
        })
        .filter(|(a, _)| *a < lines.len())
        .collect();
    regions.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (a, b) in regions {
        match merged.last_mut() {
            Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    let mut out = Vec::new();
    for (a, b) in merged {
        out.push(format!("... lines {}-{} ...", a + 1, b + 1));
        out.extend(lines[a..=b].iter().map(|l| l.to_string()));
    }
    out.join("\n")
}

fn render_focus(focus: &FocusSet, excerpts: Option<&BTreeMap<String, Vec<(usize, usize)>>>) -> String {
    let mut blocks = Vec::new();
    for (path, text) in &focus.files {
        let body = match excerpts {
            Some(h) => excerpt(text, h.get(path).map(Vec::as_slice).unwrap_or(&[]), HUNK_CONTEXT),
            None => text.trim_end_matches('\n').to_string(),
        };
        blocks.push(format!("<file path=\"{path}\">\n{body}\n</file>"));
    }
    for path in &focus.missing {
        blocks.push(format!("<file path=\"{path}\">\n(not present at the base commit)\n</file>"));
    }
    blocks.join("\n")
}

/// Fill the shared skeleton for `task` (coverage or difficulty).
pub fn render_tca_prompt(
    prompts: &PromptSet,
    task: Task,
    issue: &CleanIssue,
    instance: &Instance,
    focus_block: &str,
    repo_map: &RepoMapText,
) -> Result<String, TemplateError> {
    let (description, scale) = prompts.task_sections(task);
    prompts.tca_skeleton.render(&[
        ("task", &description.text),
        ("scale", &scale.text),
        ("title", &issue.title),
        ("body", &issue.body),
        ("gold_patch", instance.gold_patch.trim_end_matches('\n')),
        ("test_patch", instance.test_patch.trim_end_matches('\n')),
        ("focus_files", focus_block),
        ("repo_map", repo_map.text.trim_end_matches('\n')),
    ])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltPrompt {
    pub text: String,
    pub token_estimate: usize,
    /// The map actually embedded (possibly shrunk below the requested budget).
    pub map: RepoMapText,
    pub focus_excerpted: bool,
}

/// Prompt for `task` that fits `context_limit`.
///
/// Focus files over [`FOCUS_SHARE`] of the limit are cut to hunk regions; then the map
/// budget is halved until the prompt fits or the map is down to one block.
#[allow(clippy::too_many_arguments)]
pub fn build_tca_prompt(
    prompts: &PromptSet,
    task: Task,
    instance: &Instance,
    issue: &CleanIssue,
    focus: &FocusSet,
    map: &MapArtifacts,
    map_budget: usize,
    context_limit: usize,
    counter: &dyn TokenCounter,
) -> Result<BuiltPrompt, PipelineError> {
    let mut focus_block = render_focus(focus, None);
    let mut focus_excerpted = false;
    if counter.count(&focus_block) as f64 > FOCUS_SHARE * context_limit as f64 {
        focus_block = render_focus(focus, Some(&hunk_ranges(instance)?));
        focus_excerpted = true;
    }
    let mut budget = map_budget;
    loop {
        let rendered = if budget == map.map.budget { map.map.clone() } else { map.rerender(budget, counter) };
        let text = render_tca_prompt(prompts, task, issue, instance, &focus_block, &rendered)?;
        let estimate = counter.count(&text);
        if estimate <= context_limit {
            return Ok(BuiltPrompt { text, token_estimate: estimate, map: rendered, focus_excerpted });
        }
        if rendered.included_symbols.len() <= 1 || budget <= 1 {
            return Err(PipelineError::ContextBudgetExceeded { estimate, limit: context_limit });
        }
        budget /= 2;
    }
}

/// Where checkouts come from and how maps are built.
#[derive(Clone)]
pub struct RepoEnv {
    pub cache_dir: PathBuf,
    pub source: RepoSource,
    pub mapper: Arc<RepoMapper>,
    pub map_budget: usize,
}

/// Everything the repository-backed tasks need for one instance, built once.
#[derive(Debug, Clone)]
pub struct PreparedRepo {
    pub workspace: Workspace,
    pub issue: CleanIssue,
    pub focus: FocusSet,
    pub map: MapArtifacts,
}

pub fn prepare_repo(instance: &Instance, env: &RepoEnv) -> Result<PreparedRepo, PipelineError> {
    let workspace = checkout_workspace(instance, &env.cache_dir, &env.source)?;
    let issue = clean_issue(&instance.issue_title, &instance.issue_body);
    let focus = collect_focus(instance, &workspace)?;
    let mentioned = mentioned_idents(&format!("{}\n{}", issue.title, issue.body));
    let map = env.mapper.build_map(
        &workspace.root_path,
        Some(&workspace.checked_out_commit),
        &focus.paths(),
        &mentioned,
        env.map_budget,
    )?;
    Ok(PreparedRepo { workspace, issue, focus, map })
}

/// Structural parse only; `None` when the block has no valid score.
pub fn parse_tca_local(text: &str) -> Option<TcaOutcome> {
    let block = parse_block(text)?;
    Some(TcaOutcome {
        score: block.score?,
        rationale: block.rationale.unwrap_or_default(),
        counter_example: block.counter_example,
        via_auxiliary: false,
    })
}

fn parse_with_aux(gateway: &Gateway, prompts: &PromptSet, raw: &str, aux: &ModelSpec, ctx: &CallContext) -> (Result<TcaOutcome, ParseFailure>, Vec<UsageRecord>) {
    if let Some(o) = parse_tca_local(raw) {
        return (Ok(o), Vec::new());
    }
    let prompt = match prompts.aux_extract.render(&[("output", raw)]) {
        Ok(p) => p,
        Err(_) => return (Err(UnparseableOutput.into()), Vec::new()),
    };
    let aux_ctx = CallContext { kind: CallKind::AuxParse, ..ctx.clone() };
    let seed = ctx.run_index.unwrap_or(0) as u64;
    match gateway.complete(aux, &prompt, seed, &aux_ctx) {
        Ok(c) => {
            let parsed = parse_score_value(&c.text)
                .map(|score| TcaOutcome { score, rationale: raw.to_string(), counter_example: None, via_auxiliary: true })
                .ok_or(UnparseableOutput.into());
            (parsed, vec![c.usage])
        }
        Err(e) => (Err(e.into()), Vec::new()),
    }
}

/// Local parse, else ask the auxiliary model for the bare score (logged as an
/// auxiliary-parse call).
pub fn parse_score_with_auxiliary(
    gateway: &Gateway,
    prompts: &PromptSet,
    raw_text: &str,
    aux_spec: &ModelSpec,
    ctx: &CallContext,
) -> Result<TcaOutcome, ParseFailure> {
    parse_with_aux(gateway, prompts, raw_text, aux_spec, ctx).0
}

/// Run `task` (coverage or difficulty) against an already prepared repository.
#[allow(clippy::too_many_arguments)]
pub fn run_prepared(
    gateway: &Gateway,
    prompts: &PromptSet,
    task: Task,
    instance: &Instance,
    prepared: &PreparedRepo,
    spec: &ModelSpec,
    aux_spec: &ModelSpec,
    cfg: &RunConfig,
    counter: &dyn TokenCounter,
) -> Result<Vec<RunResult>, PipelineError> {
    let built = build_tca_prompt(
        prompts,
        task,
        instance,
        &prepared.issue,
        &prepared.focus,
        &prepared.map,
        prepared.map.map.budget,
        spec.context_limit,
        counter,
    )?;
    execute_runs(gateway, spec, &instance.instance_id, task, &built.text, cfg, |raw, ctx| -> ParseOutcome {
        let (res, usage) = parse_with_aux(gateway, prompts, raw, aux_spec, ctx);
        let parsed = res.map(|o| {
            let mut flags = Vec::new();
            if o.via_auxiliary {
                flags.push(RunFlag::AuxiliaryParse);
            }
            let counter_example = match task {
                Task::Tca if o.score.value() > 0 => {
                    if o.counter_example.is_none() {
                        flags.push(RunFlag::MissingCounterExample);
                    }
                    o.counter_example
                }
                _ => None,
            };
            Parsed { score: o.score, rationale: o.rationale, candidate_solution: None, counter_example, flags }
        });
        (parsed, usage)
    })
}

/// Check out, map once, then `cfg.runs` coverage runs.
pub fn run_tca(
    gateway: &Gateway,
    prompts: &PromptSet,
    instance: &Instance,
    env: &RepoEnv,
    spec: &ModelSpec,
    aux_spec: &ModelSpec,
    cfg: &RunConfig,
) -> Result<Vec<RunResult>, PipelineError> {
    let prepared = prepare_repo(instance, env)?;
    run_prepared(gateway, prompts, Task::Tca, instance, &prepared, spec, aux_spec, cfg, env.mapper.token_counter())
}

/// As [`run_tca`] with the difficulty task description and effort scale.
pub fn run_difficulty(
    gateway: &Gateway,
    prompts: &PromptSet,
    instance: &Instance,
    env: &RepoEnv,
    spec: &ModelSpec,
    aux_spec: &ModelSpec,
    cfg: &RunConfig,
) -> Result<Vec<RunResult>, PipelineError> {
    let prepared = prepare_repo(instance, env)?;
    run_prepared(gateway, prompts, Task::Difficulty, instance, &prepared, spec, aux_spec, cfg, env.mapper.token_counter())
}
