use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use swelabel_core::gateway::{Gateway, ModelSpec};
use swelabel_core::pipeline::{PipelineError, RunConfig};
use swelabel_core::prompts::PromptSet;
use swelabel_core::repomap::{MapConfig, RepoMapper, DEFAULT_MAP_BUDGET};
use swelabel_core::tca::{prepare_repo, run_difficulty, run_prepared, run_tca, RepoEnv};
use swelabel_core::workspace::{checkout_workspace, is_clean, tracked_files, RepoSource, WorkspaceError};
use swelabel_core::{Instance, Task};

fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(["-c", "user.name=fixture", "-c", "user.email=fixture@example.com", "-c", "commit.gpgsign=false"])
        .args(args)
        .env("GIT_AUTHOR_DATE", "2020-01-01T00:00:00Z")
        .env("GIT_COMMITTER_DATE", "2020-01-01T00:00:00Z")
        .output()
        .unwrap();
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

fn write(root: &Path, rel: &str, text: &str) {
    let p = root.join(rel);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, text).unwrap();
}

/// Mirror `acme__calc` with two commits; returns (mirror dir, first sha, second sha).
fn mirror(root: &Path) -> (PathBuf, String, String) {
    let mirrors = root.join("mirrors");
    let repo = mirrors.join("acme__calc");
    std::fs::create_dir_all(&repo).unwrap();
    git(&repo, &["init", "-q"]);
    write(&repo, "calc/core.py", "def parse(s):\n    return s[0]\n\n\ndef evaluate(expr):\n    return parse(expr)\n");
    write(&repo, "calc/cli.py", "from calc.core import evaluate\n\n\ndef main(argv):\n    return evaluate(argv[1])\n");
    write(&repo, "tests/test_core.py", "from calc.core import parse\n\n\ndef test_parse():\n    assert parse('1') == '1'\n");
    git(&repo, &["add", "-A"]);
    git(&repo, &["commit", "-q", "-m", "first"]);
    let first = git(&repo, &["rev-parse", "HEAD"]);
    write(&repo, "calc/core.py", "def parse(s):\n    return s[:1]\n");
    git(&repo, &["commit", "-q", "-am", "second"]);
    let second = git(&repo, &["rev-parse", "HEAD"]);
    (mirrors, first, second)
}

const GOLD: &str = "diff --git a/calc/core.py b/calc/core.py\n--- a/calc/core.py\n+++ b/calc/core.py\n@@ -1,2 +1,2 @@\n def parse(s):\n-    return s[0]\n+    return s[:1]\n";
const TEST: &str = "diff --git a/tests/test_core.py b/tests/test_core.py\n--- a/tests/test_core.py\n+++ b/tests/test_core.py\n@@ -4,2 +4,5 @@\n def test_parse():\n     assert parse('1') == '1'\n+\n+def test_empty():\n+    assert parse('') == ''\n";

fn instance(sha: &str) -> Instance {
    Instance {
        instance_id: "acme__calc-1".into(),
        repo: "acme/calc".into(),
        base_commit: sha.into(),
        issue_title: "parse crashes on empty input".into(),
        issue_body: "Calling `parse('')` raises IndexError instead of returning ''.".into(),
        gold_patch: GOLD.into(),
        test_patch: TEST.into(),
        fail_to_pass: vec!["tests/test_core.py::test_empty".into()],
        pass_to_pass: vec!["tests/test_core.py::test_parse".into()],
        extras: Default::default(),
    }
}

#[test]
fn checkout_reads_base_commit_and_stays_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let (mirrors, first, second) = mirror(tmp.path());
    let cache = tmp.path().join("cache");
    let source = RepoSource::Mirror(mirrors);

    let ws = checkout_workspace(&instance(&first), &cache, &source).unwrap();
    assert_eq!(ws.checked_out_commit, first);
    assert!(ws.root_path.starts_with(cache.join("acme__calc")));
    assert!(is_clean(&ws));
    assert_eq!(ws.read_file("calc/core.py").unwrap(), "def parse(s):\n    return s[0]\n\n\ndef evaluate(expr):\n    return parse(expr)\n");
    assert_eq!(tracked_files(&ws).unwrap(), ["calc/cli.py", "calc/core.py", "tests/test_core.py"]);
    assert!(ws.read_file("missing.py").is_none());

    // Cache hit for a short sha; a different commit gets its own entry.
    let again = checkout_workspace(&instance(&first[..10]), &cache, &source);
    assert!(again.is_ok());
    let ws2 = checkout_workspace(&instance(&second), &cache, &source).unwrap();
    assert_eq!(ws2.read_file("calc/core.py").unwrap(), "def parse(s):\n    return s[:1]\n");
    assert!(is_clean(&ws) && is_clean(&ws2));
}

#[test]
fn checkout_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let (mirrors, _, _) = mirror(tmp.path());
    let cache = tmp.path().join("cache");
    let err = checkout_workspace(&instance("deadbeefdeadbeef"), &cache, &RepoSource::Mirror(mirrors.clone())).unwrap_err();
    assert!(matches!(err, WorkspaceError::CommitNotFound { .. }));
    let mut other = instance("deadbeef");
    other.repo = "acme/other".into();
    let err = checkout_workspace(&other, &cache, &RepoSource::Mirror(mirrors)).unwrap_err();
    assert!(matches!(err, WorkspaceError::RepoUnavailable { .. }));
}

fn env(tmp: &Path, mirrors: PathBuf) -> RepoEnv {
    RepoEnv {
        cache_dir: tmp.join("cache"),
        source: RepoSource::Mirror(mirrors),
        mapper: Arc::new(RepoMapper::new(MapConfig::default()).unwrap()),
        map_budget: DEFAULT_MAP_BUDGET,
    }
}

#[test]
fn coverage_runs_share_one_map() {
    let tmp = tempfile::tempdir().unwrap();
    let (mirrors, first, _) = mirror(tmp.path());
    let env = env(tmp.path(), mirrors);
    let gw = Gateway::default();
    let inst = instance(&first);
    let runs = run_tca(&gw, &PromptSet::default(), &inst, &env, &ModelSpec::stub("m"), &ModelSpec::stub("aux"), &RunConfig::default()).unwrap();
    assert_eq!(runs.len(), 3);
    assert_eq!(env.mapper.extraction_count(), 1);
    assert!(runs.iter().all(|r| r.task == Task::Tca && r.score.is_some()));
    for r in &runs {
        let positive = r.score.unwrap().value() > 0;
        assert_eq!(r.counter_example.is_some(), positive, "{r:?}");
    }

    let prepared = prepare_repo(&inst, &env).unwrap();
    assert!(prepared.focus.missing.is_empty());
    assert_eq!(prepared.focus.paths(), ["calc/core.py", "tests/test_core.py"]);
    assert!(prepared.map.map.text.contains("calc/core.py:\n  def parse(s):"));
    let a = run_prepared(&gw, &PromptSet::default(), Task::Difficulty, &inst, &prepared, &ModelSpec::stub("m"), &ModelSpec::stub("aux"), &RunConfig::default(), env.mapper.token_counter()).unwrap();
    let b = run_difficulty(&gw, &PromptSet::default(), &inst, &env, &ModelSpec::stub("m"), &ModelSpec::stub("aux"), &RunConfig::default()).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.counter_example.is_none()));
}

#[test]
fn tiny_context_limit_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let (mirrors, first, _) = mirror(tmp.path());
    let env = env(tmp.path(), mirrors);
    let spec = ModelSpec { context_limit: 100, ..ModelSpec::stub("m") };
    let gw = Gateway::default();
    let err = run_tca(&gw, &PromptSet::default(), &instance(&first), &env, &spec, &ModelSpec::stub("aux"), &RunConfig::default()).unwrap_err();
    assert!(matches!(err, PipelineError::ContextBudgetExceeded { limit: 100, .. }));
    assert!(gw.log().is_empty());
}
