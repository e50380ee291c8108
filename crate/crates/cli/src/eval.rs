//! `swelabel eval`: accuracy, agreement, rationale similarity and scaffold analyses.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;
use swelabel_core::agreement::{report, run_agreement, Metric, ReliabilityMatrix};
use swelabel_core::dataset::{read_lines, read_records};
use swelabel_core::evalkit::{
    accuracy_report, anova_oneway, format_percent, reference_labels, resolution_rates, similarity_report,
    HumanAnnotation, ResultsLayout,
};
use swelabel_core::gateway::median;
use swelabel_core::{BinaryLabel, LabelRecord, Task};

use crate::{config_err, data_err, CliResult, LabeledTask, ModelArgs};

fn records_for(path: &PathBuf, task: Task) -> CliResult<Vec<LabelRecord>> {
    let all = read_records(path).with_context(|| format!("records {}", path.display())).map_err(data_err)?;
    Ok(all.into_iter().filter(|r| r.task == task).collect())
}

fn binary_task(task: LabeledTask) -> CliResult<Task> {
    match Task::from(task) {
        Task::Difficulty => Err(config_err(anyhow!("difficulty has no binary label or human reference"))),
        t => Ok(t),
    }
}

#[derive(Args, Debug)]
pub struct AccuracyArgs {
    /// labels.jsonl written by `label`.
    #[arg(long)]
    pred: PathBuf,
    /// Human annotations, one JSON object per instance with three scores per task.
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, value_enum)]
    task: LabeledTask,
}

pub fn accuracy(args: AccuracyArgs) -> CliResult {
    let task = binary_task(args.task)?;
    let predicted: BTreeMap<String, BinaryLabel> = records_for(&args.pred, task)?
        .into_iter()
        .filter_map(|r| Some((r.instance_id, r.binary_label?)))
        .collect();
    let annotations: Vec<HumanAnnotation> = read_lines(&args.reference)
        .with_context(|| format!("annotations {}", args.reference.display()))
        .map_err(data_err)?;
    let reference: BTreeMap<String, BinaryLabel> = reference_labels(&annotations)
        .map_err(data_err)?
        .into_iter()
        .filter_map(|(id, l)| Some((id, l.get(task)?)))
        .collect();
    let rep = accuracy_report(&predicted, &reference).map_err(data_err)?;
    println!("{task} accuracy: {} ({}/{})", format_percent(rep.accuracy), rep.correct, rep.total);
    let width = rep.per_project.keys().map(String::len).max().unwrap_or(0);
    for (project, (correct, total)) in &rep.per_project {
        println!("  {project:<width$}  {:>6}  ({correct}/{total})", format_percent(*correct as f64 / *total as f64));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct AgreementArgs {
    /// labels.jsonl; the runs of each record act as raters.
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    records: Option<PathBuf>,
    #[arg(long, value_enum, requires = "records")]
    task: Option<LabeledTask>,
    /// Reliability data: `{"unit": id, "values": {rater: value}}` per line.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// nominal, ordinal or interval (for --matrix).
    #[arg(long, default_value = "nominal")]
    metric: String,
}

pub fn agreement(args: AgreementArgs) -> CliResult {
    let rep = match (&args.records, &args.matrix) {
        (Some(path), _) => {
            let task = args.task.map(Task::from).ok_or_else(|| config_err(anyhow!("--records needs --task")))?;
            let records = records_for(path, task)?;
            run_agreement(&records).map_err(data_err)?
        }
        (None, Some(path)) => {
            let metric: Metric = args.metric.parse().map_err(|e: String| config_err(anyhow!(e)))?;
            let text = std::fs::read_to_string(path).with_context(|| format!("matrix {}", path.display())).map_err(data_err)?;
            let matrix = ReliabilityMatrix::from_jsonl(&text, metric).map_err(data_err)?;
            report(&matrix).map_err(data_err)?
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    println!("alpha = {:.3} ({}), {} pairable values", rep.alpha, rep.band, rep.n_pairable_values);
    Ok(())
}

#[derive(Args, Debug)]
pub struct SimilarityArgs {
    /// Human annotations carrying `ica_rationales` / `tca_rationales`.
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    records: PathBuf,
    #[arg(long, value_enum)]
    task: LabeledTask,
    /// Embedding model and endpoint.
    #[command(flatten)]
    model: ModelArgs,
}

pub fn similarity(args: SimilarityArgs) -> CliResult {
    let task = binary_task(args.task)?;
    let spec = args.model.spec(&args.model.model);
    spec.validate().map_err(|e| config_err(anyhow!("model: {e}")))?;
    let gateway = args.model.gateway()?;
    let annotations: Vec<HumanAnnotation> = read_lines(&args.annotations)
        .with_context(|| format!("annotations {}", args.annotations.display()))
        .map_err(data_err)?;
    let records: BTreeMap<String, LabelRecord> =
        records_for(&args.records, task)?.into_iter().map(|r| (r.instance_id.clone(), r)).collect();

    let (mut corpus, mut human_words, mut model_words) = (Vec::new(), Vec::new(), Vec::new());
    for a in &annotations {
        let Some(rec) = records.get(&a.instance_id) else { continue };
        let human = if task == Task::Ica { &a.ica_rationales } else { &a.tca_rationales };
        let model: Vec<String> = rec.runs.iter().map(|r| r.rationale.clone()).collect();
        let rep = match similarity_report(&gateway, &spec, &a.instance_id, human, &model) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{}: {e}", a.instance_id);
                continue;
            }
        };
        let pairs: Vec<f64> = rep.seat_vs_run.iter().flatten().flatten().copied().collect();
        println!(
            "{}  corpus {:.3}  pairwise median {}",
            rep.instance_id,
            rep.corpus,
            median(&pairs).map(|m| format!("{m:.3}")).unwrap_or_else(|| "-".into())
        );
        corpus.push(rep.corpus);
        human_words.extend(rep.human_words.iter().map(|w| *w as f64));
        model_words.extend(rep.model_words.iter().map(|w| *w as f64));
    }
    let Some(m) = median(&corpus) else {
        return Err(data_err(anyhow!("no instance has both annotations and {task} records")));
    };
    println!("median corpus similarity {m:.3} over {} instances", corpus.len());
    println!(
        "median words: human {}, model {}",
        median(&human_words).unwrap_or(0.0),
        median(&model_words).unwrap_or(0.0)
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct ScaffoldArgs {
    /// Scaffold result directories (comma-separated or repeated).
    #[arg(long, value_delimiter = ',', required = true)]
    dirs: Vec<PathBuf>,
    /// labels.jsonl whose instances and labels define the groups.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum, default_value = "tca")]
    task: LabeledTask,
    /// Results file inside each scaffold directory.
    #[arg(long, default_value = "results/results.json")]
    results_path: PathBuf,
    /// Key of the resolved-id list in the results file.
    #[arg(long, default_value = "resolved")]
    key: String,
}

pub fn scaffold(args: ScaffoldArgs) -> CliResult {
    let task = Task::from(args.task);
    let records = records_for(&args.labels, task)?;
    let ids: Vec<String> = records.iter().map(|r| r.instance_id.clone()).collect();
    let layout = ResultsLayout { relative_path: args.results_path, key: args.key };
    let rates = resolution_rates(&args.dirs, &ids, &layout).map_err(data_err)?;

    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (rec, rate) in records.iter().zip(&rates) {
        let group = match rec.binary_label {
            Some(l) => l.to_string(),
            None => format!("score {}", rec.consensus_score),
        };
        println!("{}  {}/{}  {:.3}  {group}", rate.instance_id, rate.resolved_count, rate.scaffold_count, rate.rate);
        groups.entry(group).or_default().push(rate.rate);
    }
    let names: Vec<&String> = groups.keys().collect();
    let anova = anova_oneway(&groups.values().cloned().collect::<Vec<_>>()).map_err(data_err)?;
    println!("group        n  median rate");
    for (name, med) in names.iter().zip(&anova.group_medians) {
        println!("{name:<12} {:>2}  {med:.3}", groups[*name].len());
    }
    println!("F({}, {}) = {:.3}, p = {:.4}", anova.df_between, anova.df_within, anova.f_stat, anova.p_value);
    Ok(())
}
