//! Discretization, multi-run aggregation and the verification filter.

use chrono::{DateTime, Utc};

use crate::types::{
    BinaryLabel, ClarityScore, ConsensusRule, CoverageScore, IssueLabel, LabelRecord, RunResult, Score, Task,
    TestLabel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("every run was flagged; no valid score to aggregate")]
pub struct NoValidRuns;

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    pub consensus_score: Score,
    pub binary_label: Option<BinaryLabel>,
    pub confidence: f64,
    pub rule_applied: ConsensusRule,
    pub valid_run_count: usize,
}

pub fn discretize_ica(score: ClarityScore) -> IssueLabel {
    if score.value() <= 1 {
        IssueLabel::WellSpecified
    } else {
        IssueLabel::Underspecified
    }
}

pub fn discretize_tca(score: CoverageScore) -> TestLabel {
    if score.value() <= 1 {
        TestLabel::Adequate
    } else {
        TestLabel::Inadequate
    }
}

/// Binary label for a task's score; difficulty has none.
pub fn discretize(task: Task, score: Score) -> Option<BinaryLabel> {
    match task {
        Task::Ica => Some(BinaryLabel::Issue(discretize_ica(score))),
        Task::Tca => Some(BinaryLabel::Test(discretize_tca(score))),
        Task::Difficulty => None,
    }
}

/// Strict majority over the valid scores, else the median (upper median for even counts).
///
/// Confidence is the share of valid runs agreeing with the consensus binary label, or
/// with the exact consensus score for tasks without one. Absent scores are ignored.
pub fn aggregate(task: Task, scores: &[Option<Score>]) -> Result<ConsensusResult, NoValidRuns> {
    let mut valid: Vec<Score> = scores.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(NoValidRuns);
    }
    valid.sort();
    let n = valid.len();
    let majority = Score::all()
        .into_iter()
        .find(|s| 2 * valid.iter().filter(|v| *v == s).count() > n);
    let (consensus_score, rule_applied) = match majority {
        Some(s) => (s, ConsensusRule::Majority),
        None => (valid[n / 2], ConsensusRule::Median),
    };
    let binary_label = discretize(task, consensus_score);
    let agreeing = match binary_label {
        Some(label) => valid.iter().filter(|s| discretize(task, **s) == Some(label)).count(),
        None => valid.iter().filter(|s| **s == consensus_score).count(),
    };
    Ok(ConsensusResult {
        consensus_score,
        binary_label,
        confidence: agreeing as f64 / n as f64,
        rule_applied,
        valid_run_count: n,
    })
}

/// Both scores below 2.
pub fn verify(ica: ClarityScore, tca: CoverageScore) -> bool {
    ica.value() < 2 && tca.value() < 2
}

/// Provenance stamped onto every record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordMeta {
    pub model_id: String,
    pub timestamp: DateTime<Utc>,
    pub template_hash: String,
    pub checklist_hash: Option<String>,
    pub manifest_hash: String,
}

pub fn label_record(
    instance_id: &str,
    task: Task,
    runs: Vec<RunResult>,
    meta: &RecordMeta,
) -> Result<LabelRecord, NoValidRuns> {
    let scores: Vec<Option<Score>> = runs.iter().map(|r| r.score).collect();
    let c = aggregate(task, &scores)?;
    Ok(LabelRecord {
        instance_id: instance_id.to_string(),
        task,
        runs,
        consensus_score: c.consensus_score,
        binary_label: c.binary_label,
        confidence: c.confidence,
        rule_applied: c.rule_applied,
        valid_run_count: c.valid_run_count,
        model_id: meta.model_id.clone(),
        timestamp: meta.timestamp,
        template_hash: meta.template_hash.clone(),
        checklist_hash: meta.checklist_hash.clone(),
        manifest_hash: meta.manifest_hash.clone(),
    })
}
