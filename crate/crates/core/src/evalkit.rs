//! Evaluation procedures: reference labels, accuracy, sampling, rationale
//! similarity, scaffold resolution rates and one-way ANOVA.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::consensus::discretize;
use crate::gateway::{median, CallContext, CallKind, Gateway, GatewayError, ModelSpec};
use crate::types::{BinaryLabel, IssueLabel, Score, Task, TestLabel};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("predicted and reference labels share no instance ids")]
    EmptyIntersection,
    #[error("every rationale is empty")]
    AllEmpty,
    #[error("vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroVector,
    #[error("no results file in scaffold directory {}", .0.display())]
    MissingResultsFile(PathBuf),
    #[error("{}: {reason}", path.display())]
    MalformedResults { path: PathBuf, reason: String },
    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),
    #[error("incomplete beta domain error: {0}")]
    Domain(String),
    #[error("{id}: expected 3 human scores for {task}, got {got}")]
    AnnotationCount { id: String, task: Task, got: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

// ---------------------------------------------------------------- reference labels

/// 2-of-3 majority of the discretized human scores; `None` for difficulty.
pub fn majority_reference(scores: [Score; 3], task: Task) -> Option<BinaryLabel> {
    let labels: Vec<BinaryLabel> = scores.iter().filter_map(|s| discretize(task, *s)).collect();
    let first = *labels.first()?;
    let agree = labels.iter().filter(|l| **l == first).count();
    if agree >= 2 {
        Some(first)
    } else {
        labels.into_iter().find(|l| *l != first)
    }
}

/// One instance's human annotations, seats in annotation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanAnnotation {
    pub instance_id: String,
    #[serde(default)]
    pub ica: Vec<Score>,
    #[serde(default)]
    pub tca: Vec<Score>,
    #[serde(default)]
    pub ica_rationales: Vec<String>,
    #[serde(default)]
    pub tca_rationales: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReferenceLabels {
    pub ica: Option<IssueLabel>,
    pub tca: Option<TestLabel>,
}

pub type ReferenceLabelSet = BTreeMap<String, ReferenceLabels>;

fn three(id: &str, task: Task, scores: &[Score]) -> Result<Option<[Score; 3]>, EvalError> {
    match scores.len() {
        0 => Ok(None),
        3 => Ok(Some([scores[0], scores[1], scores[2]])),
        got => Err(EvalError::AnnotationCount { id: id.to_string(), task, got }),
    }
}

pub fn reference_labels(annotations: &[HumanAnnotation]) -> Result<ReferenceLabelSet, EvalError> {
    let mut out = ReferenceLabelSet::new();
    for a in annotations {
        let ica = three(&a.instance_id, Task::Ica, &a.ica)?.and_then(|s| match majority_reference(s, Task::Ica) {
            Some(BinaryLabel::Issue(l)) => Some(l),
            _ => None,
        });
        let tca = three(&a.instance_id, Task::Tca, &a.tca)?.and_then(|s| match majority_reference(s, Task::Tca) {
            Some(BinaryLabel::Test(l)) => Some(l),
            _ => None,
        });
        out.insert(a.instance_id.clone(), ReferenceLabels { ica, tca });
    }
    Ok(out)
}

impl ReferenceLabels {
    pub fn get(&self, task: Task) -> Option<BinaryLabel> {
        match task {
            Task::Ica => self.ica.map(BinaryLabel::Issue),
            Task::Tca => self.tca.map(BinaryLabel::Test),
            Task::Difficulty => None,
        }
    }
}

// ---------------------------------------------------------------- accuracy

/// Project part of a SWE-bench id (`owner__repo-123` → `owner__repo`).
pub fn project_of(instance_id: &str) -> &str {
    instance_id.rsplit_once('-').map(|(p, _)| p).unwrap_or(instance_id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Project → (correct, total).
    pub per_project: BTreeMap<String, (usize, usize)>,
}

/// Share of equal labels over the ids both maps contain.
pub fn accuracy<L: PartialEq>(predicted: &BTreeMap<String, L>, reference: &BTreeMap<String, L>) -> Result<f64, EvalError> {
    accuracy_report(predicted, reference).map(|r| r.accuracy)
}

pub fn accuracy_report<L: PartialEq>(
    predicted: &BTreeMap<String, L>,
    reference: &BTreeMap<String, L>,
) -> Result<AccuracyReport, EvalError> {
    let mut per_project: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let (mut correct, mut total) = (0, 0);
    for (id, p) in predicted {
        let Some(r) = reference.get(id) else { continue };
        let hit = usize::from(p == r);
        let e = per_project.entry(project_of(id).to_string()).or_default();
        e.0 += hit;
        e.1 += 1;
        correct += hit;
        total += 1;
    }
    if total == 0 {
        return Err(EvalError::EmptyIntersection);
    }
    Ok(AccuracyReport { accuracy: correct as f64 / total as f64, correct, total, per_project })
}

/// Percentage with one decimal, e.g. `87.3%`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

// ---------------------------------------------------------------- sampling

/// Up to `k` items per group (all of a smaller group), reproducible from `seed`.
/// Groups are visited in key order; items keep their original order within a group.
pub fn quota_sample<T: Clone>(groups: &BTreeMap<String, Vec<T>>, k: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for items in groups.values() {
        let take = k.min(items.len());
        let mut picked = sample(&mut rng, items.len(), take).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| items[i].clone()));
    }
    out
}

// ---------------------------------------------------------------- rationales

fn combine_with(texts: &[String], prefix: &str) -> Result<String, EvalError> {
    let blocks: Vec<String> = texts
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.trim().is_empty())
        .map(|(i, t)| format!("{prefix}{}:\n{}", i + 1, t.trim()))
        .collect();
    if blocks.is_empty() {
        return Err(EvalError::AllEmpty);
    }
    Ok(blocks.join("\n\n"))
}

/// Seat-ordered human rationales as one document: `L1:\n…\n\nL2:\n…`.
/// Empty seats are skipped but keep their numbering.
pub fn combine_rationales(texts: &[String]) -> Result<String, EvalError> {
    combine_with(texts, "L")
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EvalError> {
    if u.len() != v.len() {
        return Err(EvalError::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(EvalError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub instance_id: String,
    /// `seat_vs_run[seat][run]`; `None` where either text is empty.
    pub seat_vs_run: Vec<Vec<Option<f64>>>,
    /// Combined human document against combined model document.
    pub corpus: f64,
    pub human_words: Vec<usize>,
    pub model_words: Vec<usize>,
}

/// Embed every human seat and model run rationale and compare them.
pub fn similarity_report(
    gateway: &Gateway,
    spec: &ModelSpec,
    instance_id: &str,
    human: &[String],
    model: &[String],
) -> Result<SimilarityReport, EvalError> {
    let ctx = CallContext { instance_id: instance_id.to_string(), task: None, run_index: None, kind: CallKind::Embedding };
    let embed = |t: &str| -> Result<Option<Vec<f64>>, EvalError> {
        if t.trim().is_empty() {
            return Ok(None);
        }
        Ok(Some(gateway.embed(spec, t, &ctx)?.values))
    };
    let h: Vec<Option<Vec<f64>>> = human.iter().map(|t| embed(t)).collect::<Result<_, _>>()?;
    let m: Vec<Option<Vec<f64>>> = model.iter().map(|t| embed(t)).collect::<Result<_, _>>()?;
    let mut seat_vs_run = Vec::new();
    for hv in &h {
        let mut row = Vec::new();
        for mv in &m {
            row.push(match (hv, mv) {
                (Some(a), Some(b)) => Some(cosine(a, b)?),
                _ => None,
            });
        }
        seat_vs_run.push(row);
    }
    let hc = embed(&combine_rationales(human)?)?.expect("combined text is non-empty");
    let mc = embed(&combine_with(model, "R")?)?.expect("combined text is non-empty");
    Ok(SimilarityReport {
        instance_id: instance_id.to_string(),
        seat_vs_run,
        corpus: cosine(&hc, &mc)?,
        human_words: human.iter().map(|t| word_count(t)).collect(),
        model_words: model.iter().map(|t| word_count(t)).collect(),
    })
}

// ---------------------------------------------------------------- scaffolds

/// Where a scaffold directory lists its resolved instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultsLayout {
    pub relative_path: PathBuf,
    pub key: String,
}

impl Default for ResultsLayout {
    fn default() -> Self {
        ResultsLayout { relative_path: PathBuf::from("results/results.json"), key: "resolved".to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRate {
    pub instance_id: String,
    pub resolved_count: usize,
    pub scaffold_count: usize,
    pub rate: f64,
}

pub fn read_resolved(dir: &Path, layout: &ResultsLayout) -> Result<HashSet<String>, EvalError> {
    let path = dir.join(&layout.relative_path);
    let text = std::fs::read_to_string(&path).map_err(|_| EvalError::MissingResultsFile(dir.to_path_buf()))?;
    let malformed = |reason: String| EvalError::MalformedResults { path: path.clone(), reason };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    let list = value
        .get(&layout.key)
        .and_then(|v| v.as_array())
        .ok_or_else(|| malformed(format!("no `{}` list", layout.key)))?;
    list.iter()
        .map(|v| v.as_str().map(String::from).ok_or_else(|| malformed(format!("non-string id {v}"))))
        .collect()
}

/// For each id, the share of scaffolds that list it as resolved.
pub fn resolution_rates(
    scaffold_dirs: &[PathBuf],
    instance_ids: &[String],
    layout: &ResultsLayout,
) -> Result<Vec<ResolutionRate>, EvalError> {
    let lists: Vec<HashSet<String>> = scaffold_dirs.iter().map(|d| read_resolved(d, layout)).collect::<Result<_, _>>()?;
    let n = lists.len();
    Ok(instance_ids
        .iter()
        .map(|id| {
            let resolved_count = lists.iter().filter(|l| l.contains(id)).count();
            ResolutionRate {
                instance_id: id.clone(),
                resolved_count,
                scaffold_count: n,
                rate: if n == 0 { 0.0 } else { resolved_count as f64 / n as f64 },
            }
        })
        .collect())
}

// ---------------------------------------------------------------- ANOVA

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_stat: f64,
    pub df_between: usize,
    pub df_within: usize,
    /// Upper tail of the F distribution at `f_stat`.
    pub p_value: f64,
    pub group_medians: Vec<f64>,
}

/// Regularized incomplete beta `I_x(a, b)` (continued fraction, with the
/// `I_x(a,b) = 1 − I_{1−x}(b,a)` swap past the mean).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64, EvalError> {
    if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
        return Err(EvalError::Domain(format!("a = {a}, b = {b} must be positive and finite")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(EvalError::Domain(format!("x = {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    statrs::function::beta::checked_beta_reg(a, b, x).map_err(|e| EvalError::Domain(e.to_string()))
}

/// `P(F > f)` for `F ~ F(d1, d2)`.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> Result<f64, EvalError> {
    if f <= 0.0 {
        return Ok(1.0);
    }
    reg_inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult, EvalError> {
    if groups.len() < 2 {
        return Err(EvalError::DegenerateGroups(format!("{} group(s); need at least 2", groups.len())));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
        return Err(EvalError::DegenerateGroups(format!("group {i} has {} value(s); need at least 2", g.len())));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let ssb: f64 = groups.iter().zip(&means).map(|(g, m)| g.len() as f64 * (m - grand).powi(2)).sum();
    let ssw: f64 = groups.iter().zip(&means).map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sum();
    if ssw <= 0.0 {
        return Err(EvalError::DegenerateGroups("no within-group variance".into()));
    }
    let (d1, d2) = (k - 1, n - k);
    let f_stat = (ssb / d1 as f64) / (ssw / d2 as f64);
    Ok(AnovaResult {
        f_stat,
        df_between: d1,
        df_within: d2,
        p_value: f_survival(f_stat, d1 as f64, d2 as f64)?,
        group_medians: groups.iter().map(|g| median(g).expect("non-empty group")).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(n: u8) -> Score {
        Score::new(n).unwrap()
    }

    /// Tanh-sinh quadrature of `f` over `[lo, hi]`. `f` receives the point and its
    /// distances to both ends so endpoint singularities are evaluated without cancellation.
    pub(crate) fn tanh_sinh(lo: f64, hi: f64, f: &dyn Fn(f64, f64, f64) -> f64) -> f64 {
        let half = (hi - lo) / 2.0;
        let mut prev = f64::NAN;
        let mut h = 0.5;
        for _ in 0..12 {
            let mut sum = 0.0;
            let mut k: i64 = 0;
            loop {
                let u = k as f64 * h;
                let s = std::f64::consts::FRAC_PI_2 * u.sinh();
                let w = std::f64::consts::FRAC_PI_2 * u.cosh() / s.cosh().powi(2);
                if w < 1e-300 || !w.is_finite() {
                    break;
                }
                // Distances from the ends for the points at +u and -u.
                let near = 2.0 * half / (1.0 + (2.0 * s).exp());
                let far = 2.0 * half - near;
                for (dlo, dhi) in if k == 0 { vec![(far, near)] } else { vec![(far, near), (near, far)] } {
                    if dlo > 0.0 && dhi > 0.0 {
                        let v = f(lo + dlo, dlo, dhi);
                        if v.is_finite() {
                            sum += w * v;
                        }
                    }
                }
                k += 1;
            }
            let est = sum * h * half;
            if (est - prev).abs() <= 1e-15 * est.abs() {
                return est;
            }
            prev = est;
            h /= 2.0;
        }
        prev
    }

    fn beta_oracle(a: f64, b: f64, x: f64) -> f64 {
        let g = |_: f64, dlo: f64, dhi: f64| dlo.powf(a - 1.0) * dhi.powf(b - 1.0);
        let part = tanh_sinh(0.0, x, &|t, dlo, _| g(t, dlo, 1.0 - t));
        let full = tanh_sinh(0.0, 1.0, &g);
        part / full
    }

    /// Upper tail of the F density, integrated after `t = y / (1 - y)`.
    fn f_tail_oracle(f: f64, d1: f64, d2: f64) -> f64 {
        let density = |_: f64, y: f64, one_minus_y: f64| {
            let t = y / one_minus_y;
            t.powf(d1 / 2.0 - 1.0) * (1.0 + d1 * t / d2).powf(-(d1 + d2) / 2.0) / one_minus_y.powi(2)
        };
        let yf = f / (1.0 + f);
        let tail = tanh_sinh(yf, 1.0, &|y, _, dhi| density(y, y, dhi));
        let total = tanh_sinh(0.0, 1.0, &density);
        tail / total
    }

    #[test]
    fn majority_reference_examples() {
        assert_eq!(majority_reference([s(0), s(1), s(3)], Task::Ica), Some(BinaryLabel::Issue(IssueLabel::WellSpecified)));
        assert_eq!(majority_reference([s(2), s(2), s(0)], Task::Tca), Some(BinaryLabel::Test(TestLabel::Inadequate)));
        assert_eq!(majority_reference([s(0), s(0), s(0)], Task::Ica), Some(BinaryLabel::Issue(IssueLabel::WellSpecified)));
        assert_eq!(majority_reference([s(3), s(0), s(1)], Task::Ica), Some(BinaryLabel::Issue(IssueLabel::WellSpecified)));
        assert_eq!(majority_reference([s(3), s(0), s(2)], Task::Ica), Some(BinaryLabel::Issue(IssueLabel::Underspecified)));
    }

    #[test]
    fn reference_from_annotations() {
        let a = HumanAnnotation {
            instance_id: "x-1".into(),
            ica: vec![s(0), s(1), s(3)],
            tca: vec![],
            ica_rationales: vec![],
            tca_rationales: vec![],
        };
        let r = reference_labels(std::slice::from_ref(&a)).unwrap();
        assert_eq!(r["x-1"], ReferenceLabels { ica: Some(IssueLabel::WellSpecified), tca: None });
        let bad = HumanAnnotation { tca: vec![s(1)], ..a };
        assert!(matches!(reference_labels(&[bad]), Err(EvalError::AnnotationCount { got: 1, .. })));
    }

    #[test]
    fn accuracy_examples() {
        let ids: Vec<String> = (0..110).map(|i| format!("p{}__r-{i}", i % 12)).collect();
        let reference: BTreeMap<String, bool> = ids.iter().map(|i| (i.clone(), true)).collect();
        let predicted: BTreeMap<String, bool> = ids.iter().enumerate().map(|(n, i)| (i.clone(), n < 96)).collect();
        let r = accuracy_report(&predicted, &reference).unwrap();
        assert_eq!((r.correct, r.total), (96, 110));
        assert_eq!(format_percent(r.accuracy), "87.3%");
        assert_eq!(r.per_project.len(), 12);
        assert_eq!(accuracy(&reference, &reference).unwrap(), 1.0);
        let other: BTreeMap<String, bool> = [("z".to_string(), true)].into();
        assert!(matches!(accuracy(&other, &reference), Err(EvalError::EmptyIntersection)));
        assert_eq!(project_of("django__django-11099"), "django__django");
    }

    #[test]
    fn quota_examples() {
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        groups.insert("a".into(), vec![0]);
        groups.insert("b".into(), (0..9).collect());
        for g in 0..10 {
            groups.insert(format!("g{g}"), (0..10 + g * 3).collect());
        }
        assert_eq!(quota_sample(&groups, 10, 1).len(), 110);
        assert_eq!(quota_sample(&groups, 10, 1), quota_sample(&groups, 10, 1));
        assert_ne!(quota_sample(&groups, 10, 1), quota_sample(&groups, 10, 2));
        let five: BTreeMap<String, Vec<usize>> = (0..5).map(|g| (g.to_string(), vec![g, g + 10])).collect();
        let picked = quota_sample(&five, 1, 0);
        assert_eq!(picked.len(), 5);
        for (g, v) in picked.iter().enumerate() {
            assert!(*v == g || *v == g + 10);
        }
    }

    #[test]
    fn rationale_helpers() {
        let t = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(combine_rationales(&t(&["a", "b", "c"])).unwrap(), "L1:\na\n\nL2:\nb\n\nL3:\nc");
        assert_eq!(combine_rationales(&t(&["only"])).unwrap(), "L1:\nonly");
        assert!(matches!(combine_rationales(&t(&["", ""])), Err(EvalError::AllEmpty)));
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("a  b\nc"), 3);
        let fixture = (0..67).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        assert_eq!(word_count(&fixture), 67);
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - 0.70710678).abs() < 1e-8);
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(EvalError::DimensionMismatch(1, 2))));
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 2.0]), Err(EvalError::ZeroVector)));
    }

    #[test]
    fn similarity_with_stub_embeddings() {
        let gw = Gateway::default();
        let human = vec!["The issue lacks a repro.".to_string(), String::new(), "Vague scope.".to_string()];
        let model = vec!["Missing reproduction steps.".to_string(), "The issue lacks a repro.".to_string()];
        let r = similarity_report(&gw, &ModelSpec::stub("emb"), "i-1", &human, &model).unwrap();
        assert_eq!(r.seat_vs_run.len(), 3);
        assert!(r.seat_vs_run[1].iter().all(Option::is_none));
        assert!((r.seat_vs_run[0][1].unwrap() - 1.0).abs() < 1e-12);
        assert!(r.corpus >= -1.0 && r.corpus <= 1.0);
        assert_eq!(r.human_words, [5, 0, 2]);
        assert_eq!(gw.log().len(), 6);
    }

    fn scaffold(root: &Path, name: &str, resolved: &[String]) -> PathBuf {
        let dir = root.join(name);
        std::fs::create_dir_all(dir.join("results")).unwrap();
        std::fs::write(dir.join("results/results.json"), serde_json::json!({ "resolved": resolved }).to_string()).unwrap();
        dir
    }

    #[test]
    fn resolution_examples() {
        let tmp = tempfile::tempdir().unwrap();
        let ids = vec!["a-1".to_string(), "b-2".to_string(), "c-3".to_string()];
        let dirs: Vec<PathBuf> = (0..25)
            .map(|i| {
                let mut resolved = vec!["c-3".to_string()];
                if i < 11 {
                    resolved.push("a-1".into());
                }
                scaffold(tmp.path(), &format!("s{i:02}"), &resolved)
            })
            .collect();
        let rates = resolution_rates(&dirs, &ids, &ResultsLayout::default()).unwrap();
        assert_eq!(rates[0].rate, 0.44);
        assert_eq!((rates[0].resolved_count, rates[0].scaffold_count), (11, 25));
        assert_eq!(rates[1].rate, 0.0);
        assert_eq!(rates[2].rate, 1.0);
        let total: usize = rates.iter().map(|r| r.resolved_count).sum();
        assert_eq!(total, 11 + 25);
        let empty = tmp.path().join("empty");
        std::fs::create_dir_all(&empty).unwrap();
        assert!(matches!(
            resolution_rates(&[empty], &ids, &ResultsLayout::default()),
            Err(EvalError::MissingResultsFile(_))
        ));
    }

    #[test]
    fn anova_fixture() {
        let r = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!((r.f_stat - 13.5).abs() < 1e-12);
        assert_eq!((r.df_between, r.df_within), (1, 4));
        assert_eq!(r.group_medians, [2.0, 5.0]);
        assert!((r.p_value - f_tail_oracle(13.5, 1.0, 4.0)).abs() < 1e-9);
        let r = anova_oneway(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap();
        assert!(r.f_stat.abs() < 1e-12 && (r.p_value - 1.0).abs() < 1e-12);
        assert!(matches!(anova_oneway(&[vec![1.0, 2.0]]), Err(EvalError::DegenerateGroups(_))));
        assert!(matches!(anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0]]), Err(EvalError::DegenerateGroups(_))));
        assert!(matches!(anova_oneway(&[vec![1.0], vec![2.0, 3.0]]), Err(EvalError::DegenerateGroups(_))));
    }

    #[test]
    fn beta_closed_forms() {
        for x in [0.0, 0.25, 1.0] {
            assert!((reg_inc_beta(1.0, 1.0, x).unwrap() - x).abs() <= 1e-12);
        }
        assert!((reg_inc_beta(1.0, 3.0, 0.5).unwrap() - 0.875).abs() <= 1e-12);
        assert!(reg_inc_beta(0.0, 1.0, 0.5).is_err());
        assert!(reg_inc_beta(1.0, 1.0, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn beta_matches_quadrature(a in 0.3f64..30.0, b in 0.3f64..30.0, x in 0.001f64..0.999) {
            let got = reg_inc_beta(a, b, x).unwrap();
            let want = beta_oracle(a, b, x);
            prop_assert!((got - want).abs() < 1e-10, "I_{}({}, {}) = {} vs {}", x, a, b, got, want);
        }

        #[test]
        fn beta_monotone(a in 0.3f64..20.0, b in 0.3f64..20.0, x in 0.0f64..1.0, dx in 0.0f64..0.1) {
            let hi = (x + dx).min(1.0);
            prop_assert!(reg_inc_beta(a, b, x).unwrap() <= reg_inc_beta(a, b, hi).unwrap() + 1e-15);
        }

        #[test]
        fn anova_matches_oracle(groups in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 2..8), 2..5)) {
            let r = anova_oneway(&groups).unwrap();
            let want = f_tail_oracle(r.f_stat, r.df_between as f64, r.df_within as f64);
            prop_assert!((r.p_value - want).abs() < 1e-6, "{} vs {}", r.p_value, want);
        }

        #[test]
        fn anova_invariances(groups in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 2..8), 2..5), c in 0.5f64..20.0, shift in -100.0f64..100.0) {
            let base = anova_oneway(&groups).unwrap();
            let mut reversed = groups.clone();
            reversed.reverse();
            let moved: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| v * c + shift).collect()).collect();
            for other in [anova_oneway(&reversed).unwrap(), anova_oneway(&moved).unwrap()] {
                prop_assert!((other.f_stat - base.f_stat).abs() <= 1e-8 * base.f_stat.max(1.0));
            }
        }
    }
}
