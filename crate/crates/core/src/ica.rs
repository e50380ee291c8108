//! Issue clarity assessment: judge the issue text alone.

use crate::gateway::{Gateway, ModelSpec};
use crate::output::{first_standalone_digit, parse_block, render_block, AnswerBlock, UnparseableOutput};
use crate::pipeline::{execute_runs, Parsed, PipelineError, RunConfig};
use crate::preprocess::{clean_issue, CleanIssue};
use crate::prompts::{PromptSet, RationaleChecklist, TemplateError};
use crate::types::{ClarityScore, Instance, RunResult, Task};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IcaOutcome {
    pub score: ClarityScore,
    pub rationale: String,
    pub candidate_solution: bool,
}

pub fn build_ica_prompt(
    prompts: &PromptSet,
    issue: &CleanIssue,
    checklist: &RationaleChecklist,
) -> Result<String, TemplateError> {
    if checklist.items.is_empty() {
        return Err(TemplateError::EmptyChecklist);
    }
    prompts.ica.render(&[
        ("scale", &prompts.ica_scale.text),
        ("checklist", &checklist.render()),
        ("title", &issue.title),
        ("body", &issue.body),
    ])
}

/// Structured block first; otherwise the first standalone 0-3 digit with the whole
/// text as rationale.
pub fn parse_ica_output(text: &str) -> Result<IcaOutcome, UnparseableOutput> {
    if let Some(AnswerBlock { score: Some(score), rationale, candidate_solution, .. }) = parse_block(text) {
        return Ok(IcaOutcome {
            score,
            rationale: rationale.unwrap_or_default(),
            candidate_solution: candidate_solution.unwrap_or(false),
        });
    }
    let score = first_standalone_digit(text).ok_or(UnparseableOutput)?;
    Ok(IcaOutcome { score, rationale: text.to_string(), candidate_solution: false })
}

pub fn render_ica_output(outcome: &IcaOutcome) -> String {
    render_block(&AnswerBlock {
        score: Some(outcome.score),
        rationale: Some(outcome.rationale.clone()),
        candidate_solution: Some(outcome.candidate_solution),
        counter_example: None,
    })
}

/// `cfg.runs` completions of the clarity prompt. Never touches the repository.
pub fn run_ica(
    gateway: &Gateway,
    prompts: &PromptSet,
    checklist: &RationaleChecklist,
    instance: &Instance,
    spec: &ModelSpec,
    cfg: &RunConfig,
) -> Result<Vec<RunResult>, PipelineError> {
    let issue = clean_issue(&instance.issue_title, &instance.issue_body);
    let prompt = build_ica_prompt(prompts, &issue, checklist)?;
    execute_runs(gateway, spec, &instance.instance_id, Task::Ica, &prompt, cfg, |raw, _| {
        let parsed = parse_ica_output(raw).map(|o| Parsed {
            score: o.score,
            rationale: o.rationale,
            candidate_solution: Some(o.candidate_solution),
            counter_example: None,
            flags: Vec::new(),
        });
        (parsed.map_err(Into::into), Vec::new())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::StubBackend;
    use crate::types::{RunFlag, Score};
    use proptest::prelude::*;

    fn instance() -> Instance {
        Instance {
            instance_id: "o__r-1".into(),
            repo: "o/r".into(),
            base_commit: "abcdef1".into(),
            issue_title: "Crash on **empty** input".into(),
            issue_body: "Calling `parse('')` raises IndexError.".into(),
            gold_patch: String::new(),
            test_patch: String::new(),
            fail_to_pass: vec![],
            pass_to_pass: vec![],
            extras: Default::default(),
        }
    }

    fn prompt() -> String {
        let issue = clean_issue(&instance().issue_title, &instance().issue_body);
        build_ica_prompt(&PromptSet::default(), &issue, &RationaleChecklist::default()).unwrap()
    }

    #[test]
    fn prompt_contents() {
        let p = prompt();
        for line in PromptSet::default().ica_scale.text.lines() {
            assert!(p.contains(line), "missing scale line {line}");
        }
        assert!(p.contains("0 (Well-specified): Clear requirements; minimal ambiguity."));
        assert_eq!(p.lines().filter(|l| l.starts_with("- ")).count(), 6);
        assert!(p.contains("<issue_title>\nCrash on empty input\n</issue_title>"));
        assert!(p.contains("SCORE:") && p.contains("RATIONALE:") && p.contains("CANDIDATE_SOLUTION:"));
        assert_eq!(p, prompt());
    }

    #[test]
    fn checklist_length_is_reflected() {
        let issue = clean_issue("t", "b");
        let c = RationaleChecklist::new(vec!["a".into(), "b".into()]).unwrap();
        let p = build_ica_prompt(&PromptSet::default(), &issue, &c).unwrap();
        assert_eq!(p.lines().filter(|l| l.starts_with("- ")).count(), 2);
    }

    #[test]
    fn parse_examples() {
        let o = parse_ica_output("SCORE: 1\nRATIONALE: minor gaps\nCANDIDATE_SOLUTION: no").unwrap();
        assert_eq!(o, IcaOutcome { score: Score::new(1).unwrap(), rationale: "minor gaps".into(), candidate_solution: false });
        let text = "Overall I rate this 2 because the scope is vague.";
        let o = parse_ica_output(text).unwrap();
        assert_eq!((o.score.value(), o.rationale.as_str(), o.candidate_solution), (2, text, false));
        assert_eq!(parse_ica_output("the issue is fine"), Err(UnparseableOutput));
    }

    #[test]
    fn stub_fixture_scores() {
        let p = prompt();
        let cfg = RunConfig { runs: 3, base_seed: 7 };
        let mut stub = StubBackend::new();
        for (i, s) in [0, 1, 1].into_iter().enumerate() {
            stub.insert(StubBackend::key(&p, cfg.seed(i)), format!("SCORE: {s}\nRATIONALE: r{i}\nCANDIDATE_SOLUTION: yes"));
        }
        let gw = Gateway::new(stub);
        let runs = run_ica(&gw, &PromptSet::default(), &RationaleChecklist::default(), &instance(), &ModelSpec::stub("m"), &cfg).unwrap();
        let scores: Vec<u8> = runs.iter().map(|r| r.score.unwrap().value()).collect();
        assert_eq!(scores, [0, 1, 1]);
        assert_eq!(runs.iter().map(|r| r.run_index).collect::<Vec<_>>(), [0, 1, 2]);
        assert!(runs.iter().all(|r| r.candidate_solution == Some(true) && r.usage.len() == 1));
        assert_eq!(gw.log().len(), 3);
    }

    #[test]
    fn single_run() {
        let gw = Gateway::default();
        let cfg = RunConfig { runs: 1, base_seed: 0 };
        let runs = run_ica(&gw, &PromptSet::default(), &RationaleChecklist::default(), &instance(), &ModelSpec::stub("m"), &cfg).unwrap();
        assert_eq!(runs.len(), 1);
        assert!(runs[0].score.is_some());
    }

    #[test]
    fn unparseable_run_is_retried_then_flagged() {
        let p = prompt();
        let cfg = RunConfig { runs: 3, base_seed: 0 };
        let mut stub = StubBackend::new();
        stub.insert(StubBackend::key(&p, cfg.seed(1)), "no idea".into());
        stub.insert(StubBackend::key(&p, cfg.retry_seed(1)), "still no idea".into());
        let gw = Gateway::new(stub);
        let runs = run_ica(&gw, &PromptSet::default(), &RationaleChecklist::default(), &instance(), &ModelSpec::stub("m"), &cfg).unwrap();
        assert_eq!(runs.len(), 3);
        assert_eq!(runs[1].score, None);
        assert_eq!(runs[1].flags, [RunFlag::Unparseable]);
        assert_eq!(runs[1].usage.len(), 2);
        assert_eq!(runs[1].raw_output, "still no idea");
        assert_eq!(runs.iter().filter(|r| r.is_valid()).count(), 2);
    }

    #[test]
    fn retry_can_recover() {
        let p = prompt();
        let cfg = RunConfig { runs: 1, base_seed: 0 };
        let mut stub = StubBackend::new();
        stub.insert(StubBackend::key(&p, cfg.seed(0)), "hmm".into());
        stub.insert(StubBackend::key(&p, cfg.retry_seed(0)), "SCORE: 3\nRATIONALE: vague".into());
        let runs = run_ica(&Gateway::new(stub), &PromptSet::default(), &RationaleChecklist::default(), &instance(), &ModelSpec::stub("m"), &cfg).unwrap();
        assert_eq!(runs[0].score, Some(Score::new(3).unwrap()));
        assert!(runs[0].flags.is_empty());
    }

    proptest! {
        #[test]
        fn render_then_parse(score in 0u8..4, rationale in "[a-z][a-z ,.]{0,50}", cand in any::<bool>()) {
            let o = IcaOutcome { score: Score::new(score).unwrap(), rationale: rationale.trim().to_string(), candidate_solution: cand };
            prop_assert_eq!(parse_ica_output(&render_ica_output(&o)).unwrap(), o);
        }
    }
}
