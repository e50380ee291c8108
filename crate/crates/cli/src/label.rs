//! `swelabel label`: batch labeling with resume, bounded workers and in-order output.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};

use anyhow::Context;
use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::Serialize;
use swelabel_core::consensus::{label_record, RecordMeta};
use swelabel_core::dataset::{load_instances, read_records};
use swelabel_core::gateway::{Gateway, ModelSpec, StubBackend, UsageLog, UsageRecord};
use swelabel_core::ica::run_ica;
use swelabel_core::pipeline::{PipelineError, RunConfig};
use swelabel_core::prompts::{sha256_hex, PromptSet, RationaleChecklist};
use swelabel_core::repomap::{Extractor, MapConfig, RepoMapper};
use swelabel_core::tca::{prepare_repo, run_prepared, RepoEnv};
use swelabel_core::workspace::RepoSource;
use swelabel_core::{Instance, LabelRecord, RunResult, Task};

use crate::{config_err, data_err, CliResult, LabelArgs, ModelArgs};

pub const LABELS_FILE: &str = "labels.jsonl";
pub const USAGE_FILE: &str = "usage.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

impl ModelArgs {
    pub fn spec(&self, model_id: &str) -> ModelSpec {
        ModelSpec {
            model_id: model_id.to_string(),
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            endpoint: self.endpoint.clone(),
            api_key_env: self.api_key_env.clone(),
            context_limit: self.context_limit,
        }
    }

    pub fn gateway(&self) -> CliResult<Gateway> {
        let stub = match &self.stub_overrides {
            Some(p) => StubBackend::from_override_file(p)
                .with_context(|| format!("stub overrides {}", p.display()))
                .map_err(config_err)?,
            None => StubBackend::new(),
        };
        Ok(Gateway::new(stub))
    }

    fn overrides_hash(&self) -> CliResult<Option<String>> {
        self.stub_overrides
            .as_ref()
            .map(|p| fs::read_to_string(p).map(|t| sha256_hex(&t)).map_err(config_err))
            .transpose()
    }
}

/// Record clock: `SOURCE_DATE_EPOCH` when set, the epoch for stub runs, else now.
pub fn clock(stub: bool) -> DateTime<Utc> {
    if let Some(secs) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse::<i64>().ok()) {
        return DateTime::from_timestamp(secs, 0).unwrap_or_default();
    }
    if stub {
        DateTime::UNIX_EPOCH
    } else {
        Utc::now()
    }
}

/// Everything that determines the labels; hashed into `manifest_hash`.
#[derive(Debug, Serialize)]
struct ConfigSnapshot {
    model: ModelSpec,
    aux_model: ModelSpec,
    tasks: Vec<Task>,
    template_hashes: BTreeMap<Task, String>,
    checklist_hash: String,
    stub_overrides_hash: Option<String>,
    map_budget: usize,
    extractor: String,
    runs: usize,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    manifest_hash: &'a str,
    config: &'a ConfigSnapshot,
    dataset: PathBuf,
    labels: PathBuf,
    usage: PathBuf,
    started_at: DateTime<Utc>,
    finished_at: Option<DateTime<Utc>>,
    records_written: usize,
    failed_instances: Vec<String>,
}

#[derive(Serialize)]
struct UsageLine<'a> {
    manifest_hash: &'a str,
    #[serde(flatten)]
    record: &'a UsageRecord,
}

struct Labeler {
    gateway: Gateway,
    prompts: PromptSet,
    checklist: RationaleChecklist,
    spec: ModelSpec,
    aux_spec: ModelSpec,
    cfg: RunConfig,
    env: RepoEnv,
    manifest_hash: String,
}

/// What one instance produced. Usage covers every call, including those of failed tasks.
struct Outcome {
    records: Vec<LabelRecord>,
    usage: Vec<UsageRecord>,
    failures: Vec<String>,
}

impl Labeler {
    fn meta(&self, task: Task) -> RecordMeta {
        RecordMeta {
            model_id: self.spec.model_id.clone(),
            timestamp: clock(self.spec.is_stub()),
            template_hash: self.prompts.hash_for(task),
            checklist_hash: (task == Task::Ica).then(|| self.checklist.hash.clone()),
            manifest_hash: self.manifest_hash.clone(),
        }
    }

    fn label(&self, inst: &Instance, tasks: &[Task]) -> Outcome {
        let log = UsageLog::new();
        let gw = self.gateway.with_log(log.clone());
        let mut runs: Vec<(Task, Result<Vec<RunResult>, PipelineError>)> = Vec::new();
        if tasks.contains(&Task::Ica) {
            runs.push((Task::Ica, run_ica(&gw, &self.prompts, &self.checklist, inst, &self.spec, &self.cfg)));
        }
        let repo_tasks: Vec<Task> = tasks.iter().copied().filter(|t| *t != Task::Ica).collect();
        let mut failures = Vec::new();
        if !repo_tasks.is_empty() {
            match prepare_repo(inst, &self.env) {
                Ok(prepared) => {
                    let counter = self.env.mapper.token_counter();
                    for task in repo_tasks {
                        let r = run_prepared(&gw, &self.prompts, task, inst, &prepared, &self.spec, &self.aux_spec, &self.cfg, counter);
                        runs.push((task, r));
                    }
                }
                Err(e) => failures.extend(repo_tasks.iter().map(|t| format!("{} {t}: {e}", inst.instance_id))),
            }
        }
        let mut out = Outcome { records: Vec::new(), usage: Vec::new(), failures };
        for (task, result) in runs {
            let labeled = result.map_err(|e| e.to_string()).and_then(|r| {
                label_record(&inst.instance_id, task, r, &self.meta(task)).map_err(|e| e.to_string())
            });
            match labeled {
                Ok(rec) => out.records.push(rec),
                Err(e) => out.failures.push(format!("{} {task}: {e}", inst.instance_id)),
            }
        }
        out.usage = log.snapshot();
        out
    }
}

/// Drop a torn final line left by an interrupted run, then read what was labeled.
fn existing_labels(path: &Path) -> CliResult<HashSet<(String, Task)>> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    let text = fs::read_to_string(path).map_err(data_err)?;
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map(|i| i + 1).unwrap_or(0);
        log::warn!("truncating incomplete last line of {}", path.display());
        OpenOptions::new().write(true).open(path).and_then(|f| f.set_len(keep as u64)).map_err(data_err)?;
    }
    let records = read_records(path).with_context(|| format!("existing {}", path.display())).map_err(data_err)?;
    Ok(records.into_iter().map(|r| (r.instance_id, r.task)).collect())
}

fn append_lines<T: Serialize>(file: &mut File, items: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    let mut buf = String::new();
    for item in items {
        buf.push_str(&serde_json::to_string(&item).expect("serializable"));
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())?;
    file.flush()
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> CliResult {
    let text = serde_json::to_string_pretty(manifest).expect("serializable") + "\n";
    fs::write(path, text).map_err(config_err)
}

pub fn run(args: LabelArgs) -> CliResult {
    if args.runs == 0 {
        return Err(config_err(anyhow::anyhow!("--runs must be at least 1")));
    }
    if args.parallel == 0 {
        return Err(config_err(anyhow::anyhow!("--parallel must be at least 1")));
    }
    let spec = args.model.spec(&args.model.model);
    let aux_spec = args.model.spec(args.aux_model.as_deref().unwrap_or(&args.model.model));
    spec.validate().map_err(|e| config_err(anyhow::anyhow!("model: {e}")))?;
    aux_spec.validate().map_err(|e| config_err(anyhow::anyhow!("aux model: {e}")))?;
    let (prompts, checklist) = match &args.templates {
        Some(dir) => {
            let prompts = PromptSet::load_dir(dir).map_err(config_err)?;
            let list = dir.join("checklist.txt");
            let checklist = if list.exists() {
                let text = fs::read_to_string(&list).map_err(config_err)?;
                RationaleChecklist::from_text(&text).map_err(config_err)?
            } else {
                RationaleChecklist::default()
            };
            (prompts, checklist)
        }
        None => (PromptSet::default(), RationaleChecklist::default()),
    };
    let gateway = args.model.gateway()?;
    let extractor = match &args.ctags {
        Some(p) => Extractor::Ctags(p.clone()),
        None => Extractor::Builtin,
    };
    let mapper = RepoMapper::new(MapConfig { extractor: extractor.clone(), ..MapConfig::default() }).map_err(config_err)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.parallel).build().map_err(config_err)?;

    let instances = load_instances(&args.dataset)
        .with_context(|| format!("dataset {}", args.dataset.display()))
        .map_err(data_err)?;

    let tasks = args.task.tasks();
    let config = ConfigSnapshot {
        model: spec.clone(),
        aux_model: aux_spec.clone(),
        tasks: tasks.clone(),
        template_hashes: tasks.iter().map(|t| (*t, prompts.hash_for(*t))).collect(),
        checklist_hash: checklist.hash.clone(),
        stub_overrides_hash: args.model.overrides_hash()?,
        map_budget: args.map_budget,
        extractor: format!("{extractor:?}"),
        runs: args.runs,
        seed: args.seed,
    };
    let manifest_hash = sha256_hex(&serde_json::to_string(&config).expect("serializable"));

    fs::create_dir_all(&args.out).with_context(|| format!("output directory {}", args.out.display())).map_err(config_err)?;
    let labels_path = args.out.join(LABELS_FILE);
    let usage_path = args.out.join(USAGE_FILE);
    let done = existing_labels(&labels_path)?;
    let jobs: Vec<(&Instance, Vec<Task>)> = instances
        .iter()
        .map(|inst| {
            let todo = tasks.iter().copied().filter(|t| !done.contains(&(inst.instance_id.clone(), *t))).collect();
            (inst, todo)
        })
        .filter(|(_, todo): &(_, Vec<Task>)| !todo.is_empty())
        .collect();
    log::info!("{} of {} instances need labels", jobs.len(), instances.len());

    let mut manifest = RunManifest {
        manifest_hash: &manifest_hash,
        config: &config,
        dataset: args.dataset.clone(),
        labels: labels_path.clone(),
        usage: usage_path.clone(),
        started_at: clock(spec.is_stub()),
        finished_at: None,
        records_written: 0,
        failed_instances: Vec::new(),
    };
    let manifest_path = args.out.join(MANIFEST_FILE);
    write_manifest(&manifest_path, &manifest)?;

    let open = |p: &Path| OpenOptions::new().create(true).append(true).open(p);
    let mut labels_file = open(&labels_path).map_err(config_err)?;
    let mut usage_file = open(&usage_path).map_err(config_err)?;

    let labeler = Arc::new(Labeler {
        gateway,
        prompts,
        checklist,
        spec: spec.clone(),
        aux_spec,
        cfg: RunConfig { runs: args.runs, base_seed: args.seed },
        env: RepoEnv {
            cache_dir: args.cache_dir.clone().unwrap_or_else(|| args.out.join("repos")),
            source: match &args.mirror {
                Some(dir) => RepoSource::Mirror(dir.clone()),
                None => RepoSource::Remote(args.remote.clone()),
            },
            mapper: Arc::new(mapper),
            map_budget: args.map_budget,
        },
        manifest_hash: manifest_hash.clone(),
    });

    let (tx, rx) = mpsc::channel::<(usize, Outcome)>();
    let total = jobs.len();
    let written = std::thread::scope(|s| {
        let writer = s.spawn(|| -> std::io::Result<(usize, Vec<String>)> {
            let mut pending: BTreeMap<usize, Outcome> = BTreeMap::new();
            let mut next = 0;
            let (mut records, mut failures) = (0, Vec::new());
            for (idx, outcome) in rx {
                pending.insert(idx, outcome);
                while let Some(o) = pending.remove(&next) {
                    append_lines(&mut labels_file, &o.records)?;
                    append_lines(&mut usage_file, o.usage.iter().map(|record| UsageLine { manifest_hash: &manifest_hash, record }))?;
                    for f in &o.failures {
                        log::warn!("{f}");
                    }
                    records += o.records.len();
                    failures.extend(o.failures);
                    next += 1;
                }
            }
            Ok((records, failures))
        });
        pool.install(|| {
            jobs.par_iter().enumerate().for_each_with(tx, |tx, (idx, (inst, todo))| {
                let _ = tx.send((idx, labeler.label(inst, todo)));
            })
        });
        writer.join().expect("writer thread")
    });
    let (records, failures) = written.context("writing outputs").map_err(config_err)?;

    manifest.finished_at = Some(clock(spec.is_stub()));
    manifest.records_written = records;
    manifest.failed_instances = failures;
    write_manifest(&manifest_path, &manifest)?;
    println!(
        "{records} records for {total} instances written to {} ({} task failures)",
        labels_path.display(),
        manifest.failed_instances.len()
    );
    Ok(())
}
