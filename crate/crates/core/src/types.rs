//! Domain types shared across the labeling pipeline.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::gateway::UsageRecord;

/// A 0–3 ordinal judgment. Shared by the clarity, coverage and difficulty scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Score(u8);

/// Issue clarity (0 = well-specified … 3 = poorly specified).
pub type ClarityScore = Score;
/// Test coverage (0 = perfect … 3 = poorly scoped).
pub type CoverageScore = Score;
/// Effort bucket (0 = under 15 minutes … 3 = more than 4 hours).
pub type DifficultyScore = Score;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("score {0} is outside 0..=3")]
pub struct ScoreOutOfRange(pub i64);

impl Score {
    pub const MAX: u8 = 3;

    pub fn new(value: u8) -> Result<Self, ScoreOutOfRange> {
        if value <= Self::MAX {
            Ok(Score(value))
        } else {
            Err(ScoreOutOfRange(value as i64))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// All four scale points in ascending order.
    pub fn all() -> [Score; 4] {
        [Score(0), Score(1), Score(2), Score(3)]
    }
}

impl TryFrom<u8> for Score {
    type Error = ScoreOutOfRange;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Score::new(value)
    }
}

impl From<Score> for u8 {
    fn from(s: Score) -> u8 {
        s.0
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Ica,
    Tca,
    Difficulty,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Ica => "ica",
            Task::Tca => "tca",
            Task::Difficulty => "difficulty",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ica" => Ok(Task::Ica),
            "tca" => Ok(Task::Tca),
            "difficulty" => Ok(Task::Difficulty),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IssueLabel {
    WellSpecified,
    Underspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestLabel {
    Adequate,
    Inadequate,
}

/// Binary outcome of a task after discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinaryLabel {
    Issue(IssueLabel),
    Test(TestLabel),
}

impl BinaryLabel {
    /// `true` for the label that keeps an instance (well-specified / adequate).
    pub fn is_positive(self) -> bool {
        matches!(
            self,
            BinaryLabel::Issue(IssueLabel::WellSpecified) | BinaryLabel::Test(TestLabel::Adequate)
        )
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BinaryLabel::Issue(IssueLabel::WellSpecified) => "WellSpecified",
            BinaryLabel::Issue(IssueLabel::Underspecified) => "Underspecified",
            BinaryLabel::Test(TestLabel::Adequate) => "Adequate",
            BinaryLabel::Test(TestLabel::Inadequate) => "Inadequate",
        };
        f.write_str(s)
    }
}

/// One SWE-bench-style row.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub instance_id: String,
    pub repo: String,
    pub base_commit: String,
    pub issue_title: String,
    pub issue_body: String,
    pub gold_patch: String,
    pub test_patch: String,
    pub fail_to_pass: Vec<String>,
    pub pass_to_pass: Vec<String>,
    /// Fields the loader does not interpret, kept verbatim.
    pub extras: serde_json::Map<String, serde_json::Value>,
}

impl Instance {
    /// `owner/name` split into its two halves.
    pub fn repo_parts(&self) -> Option<(&str, &str)> {
        self.repo.split_once('/')
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunFlag {
    /// No score could be recovered, even after the retry.
    Unparseable,
    /// Coverage score above zero without a counter-example.
    MissingCounterExample,
    /// Local parse failed and the auxiliary model supplied the score.
    AuxiliaryParse,
}

/// One stochastic run of a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_index: usize,
    pub task: Task,
    pub score: Option<Score>,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_solution: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter_example: Option<String>,
    pub raw_output: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<RunFlag>,
    /// Every gateway call made for this run: completions, the parse retry, auxiliary parses.
    pub usage: Vec<UsageRecord>,
}

impl RunResult {
    pub fn is_valid(&self) -> bool {
        self.score.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsensusRule {
    Majority,
    Median,
}

/// Consensus output for one instance and one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub instance_id: String,
    pub task: Task,
    pub runs: Vec<RunResult>,
    pub consensus_score: Score,
    /// Absent for difficulty, which has no binary discretization.
    pub binary_label: Option<BinaryLabel>,
    pub confidence: f64,
    pub rule_applied: ConsensusRule,
    pub valid_run_count: usize,
    pub model_id: String,
    pub timestamp: DateTime<Utc>,
    pub template_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checklist_hash: Option<String>,
    #[serde(default)]
    pub manifest_hash: String,
}
