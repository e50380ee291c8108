//! Krippendorff's alpha over unit × rater matrices with missing values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::consensus::discretize;
use crate::types::LabelRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Nominal,
    Ordinal,
    Interval,
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nominal" => Ok(Metric::Nominal),
            "ordinal" => Ok(Metric::Ordinal),
            "interval" => Ok(Metric::Interval),
            _ => Err(format!("unknown metric `{s}` (nominal, ordinal, interval)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityMatrix {
    pub units: Vec<String>,
    pub raters: Vec<String>,
    /// `values[unit][rater]`.
    pub values: Vec<Vec<Option<f64>>>,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgreementError {
    #[error("alpha is undefined: no unit has two or more values")]
    Undefined,
    #[error("records have differing run counts ({0} vs {1})")]
    UnequalRuns(usize, usize),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    Poor,
    Moderate,
    Substantial,
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Band::Poor => "Poor",
            Band::Moderate => "Moderate",
            Band::Substantial => "Substantial",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub alpha: f64,
    pub band: Band,
    pub n_pairable_values: usize,
}

pub fn classify_alpha(value: f64) -> Band {
    if value < 0.66 {
        Band::Poor
    } else if value < 0.80 {
        Band::Moderate
    } else {
        Band::Substantial
    }
}

/// Coincidence matrix over the sorted distinct values, plus those values.
fn coincidences(matrix: &ReliabilityMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut cats: Vec<f64> = matrix.values.iter().flatten().flatten().copied().collect();
    cats.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    cats.dedup();
    let idx = |v: f64| cats.iter().position(|c| *c == v).unwrap();
    let mut o = vec![vec![0.0; cats.len()]; cats.len()];
    for unit in &matrix.values {
        let vals: Vec<usize> = unit.iter().flatten().map(|v| idx(*v)).collect();
        let m = vals.len();
        if m < 2 {
            continue;
        }
        for (i, a) in vals.iter().enumerate() {
            for (j, b) in vals.iter().enumerate() {
                if i != j {
                    o[*a][*b] += 1.0 / (m - 1) as f64;
                }
            }
        }
    }
    (cats, o)
}

fn delta2(metric: Metric, cats: &[f64], marginals: &[f64], c: usize, k: usize) -> f64 {
    match metric {
        Metric::Nominal => f64::from(u8::from(c != k)),
        Metric::Interval => (cats[c] - cats[k]).powi(2),
        Metric::Ordinal => {
            let (lo, hi) = if c <= k { (c, k) } else { (k, c) };
            let between: f64 = marginals[lo..=hi].iter().sum();
            (between - (marginals[c] + marginals[k]) / 2.0).powi(2)
        }
    }
}

/// `1 − D_o / D_e` from the coincidence matrix. Returns 1.0 when every pairable
/// value is identical (expected disagreement zero).
pub fn alpha(matrix: &ReliabilityMatrix) -> Result<f64, AgreementError> {
    let (cats, o) = coincidences(matrix);
    let marginals: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n < 2.0 {
        return Err(AgreementError::Undefined);
    }
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..cats.len() {
        for k in 0..cats.len() {
            let d = delta2(matrix.metric, &cats, &marginals, c, k);
            observed += o[c][k] * d;
            expected += marginals[c] * marginals[k] * d;
        }
    }
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

/// Values in units that have at least two of them.
pub fn pairable_values(matrix: &ReliabilityMatrix) -> usize {
    matrix.values.iter().map(|u| u.iter().flatten().count()).filter(|m| *m >= 2).sum()
}

pub fn report(matrix: &ReliabilityMatrix) -> Result<AgreementReport, AgreementError> {
    let a = alpha(matrix)?;
    Ok(AgreementReport { alpha: a, band: classify_alpha(a), n_pairable_values: pairable_values(matrix) })
}

/// Runs as raters, one unit per record, nominal metric over binary labels
/// (raw scores for difficulty, which has no binary label). Flagged runs are missing.
pub fn run_matrix(records: &[LabelRecord]) -> Result<ReliabilityMatrix, AgreementError> {
    let width = records.first().map(|r| r.runs.len()).unwrap_or(0);
    if let Some(r) = records.iter().find(|r| r.runs.len() != width) {
        return Err(AgreementError::UnequalRuns(width, r.runs.len()));
    }
    let values = records
        .iter()
        .map(|rec| {
            rec.runs
                .iter()
                .map(|run| {
                    run.score.map(|s| match discretize(rec.task, s) {
                        Some(label) => f64::from(u8::from(label.is_positive())),
                        None => f64::from(s.value()),
                    })
                })
                .collect()
        })
        .collect();
    Ok(ReliabilityMatrix {
        units: records.iter().map(|r| r.instance_id.clone()).collect(),
        raters: (0..width).map(|i| format!("run{i}")).collect(),
        values,
        metric: Metric::Nominal,
    })
}

pub fn run_agreement(records: &[LabelRecord]) -> Result<AgreementReport, AgreementError> {
    report(&run_matrix(records)?)
}

#[derive(Deserialize)]
struct UnitLine {
    unit: String,
    values: serde_json::Map<String, serde_json::Value>,
}

impl ReliabilityMatrix {
    /// One JSON object per line: `{"unit": "id", "values": {"rater": value, ...}}`;
    /// a rater absent from a line is missing for that unit. Values are numbers, or
    /// (nominal only) strings, which are coded by sorted order.
    pub fn from_jsonl(text: &str, metric: Metric) -> Result<Self, AgreementError> {
        let mut lines = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: UnitLine = serde_json::from_str(line)
                .map_err(|e| AgreementError::Malformed { line: i + 1, reason: e.to_string() })?;
            lines.push((i + 1, parsed));
        }
        let mut raters: Vec<String> = lines.iter().flat_map(|(_, u)| u.values.keys().cloned()).collect();
        raters.sort();
        raters.dedup();
        let mut labels: Vec<String> = lines
            .iter()
            .flat_map(|(_, u)| u.values.values().filter_map(|v| v.as_str().map(String::from)))
            .collect();
        labels.sort();
        labels.dedup();
        let codes: BTreeMap<&str, f64> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i as f64)).collect();
        let mut values = Vec::new();
        for (line, u) in &lines {
            let mut row = vec![None; raters.len()];
            for (r, v) in &u.values {
                let code = match v {
                    serde_json::Value::Number(n) => n.as_f64(),
                    serde_json::Value::String(s) if metric == Metric::Nominal => Some(codes[s.as_str()]),
                    serde_json::Value::Null => None,
                    other => {
                        return Err(AgreementError::Malformed {
                            line: *line,
                            reason: format!("value {other} is not usable with the {metric:?} metric"),
                        })
                    }
                };
                row[raters.binary_search(r).unwrap()] = code;
            }
            values.push(row);
        }
        Ok(ReliabilityMatrix { units: lines.into_iter().map(|(_, u)| u.unit).collect(), raters, values, metric })
    }
}
