#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

pub fn git(dir: &Path, args: &[&str]) -> String {
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

pub fn write(root: &Path, rel: &str, text: &str) {
    let p = root.join(rel);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, text).unwrap();
}

fn commit(repo: &Path, files: &[(&str, &str)], msg: &str) -> String {
    for (rel, text) in files {
        write(repo, rel, text);
    }
    git(repo, &["add", "-A"]);
    git(repo, &["commit", "-q", "-m", msg]);
    git(repo, &["rev-parse", "HEAD"])
}

pub struct Fixture {
    pub dataset: PathBuf,
    pub mirrors: PathBuf,
}

const CALC_CORE_V1: &str = "def parse(s):\n    return s[0]\n\n\ndef divide(a, b):\n    return a / b\n\n\ndef evaluate(expr):\n    return parse(expr)\n";
const CALC_CORE_V2: &str = "def parse(s):\n    return s[:1]\n\n\ndef divide(a, b):\n    return a / b\n\n\ndef evaluate(expr):\n    return parse(expr)\n";
const CALC_CLI: &str = "from calc.core import evaluate, divide\n\n\ndef main(argv):\n    return evaluate(argv[1])\n";
const CALC_TESTS: &str = "from calc.core import parse, divide\n\n\ndef test_parse():\n    assert parse('1') == '1'\n";
const STR_UTIL: &str = "class Slugger:\n    def slugify(self, text):\n        return text.lower().replace(' ', '-')\n\n\ndef title_case(text):\n    return text.title()\n";
const STR_TESTS: &str = "from strings.util import Slugger\n\n\ndef test_slug():\n    assert Slugger().slugify('A B') == 'a-b'\n";

/// Two mirrored repositories and a three-instance dataset over them.
pub fn fixture(root: &Path) -> Fixture {
    let mirrors = root.join("mirrors");
    let calc = mirrors.join("acme__calc");
    let strings = mirrors.join("acme__strings");
    for r in [&calc, &strings] {
        std::fs::create_dir_all(r).unwrap();
        git(r, &["init", "-q"]);
    }
    let c1 = commit(&calc, &[("calc/core.py", CALC_CORE_V1), ("calc/cli.py", CALC_CLI), ("tests/test_core.py", CALC_TESTS)], "one");
    let c2 = commit(&calc, &[("calc/core.py", CALC_CORE_V2)], "two");
    let s1 = commit(&strings, &[("strings/util.py", STR_UTIL), ("tests/test_util.py", STR_TESTS), ("README.md", "# strings\n")], "one");

    let rows = [
        json!({
            "instance_id": "acme__calc-1",
            "repo": "acme/calc",
            "base_commit": c1,
            "problem_statement": "parse crashes on empty input\n\nCalling `parse('')` raises IndexError.\n\n```\n>>> parse('')\nIndexError: string index out of range\n```\n\nExpected: an empty string.",
            "patch": "diff --git a/calc/core.py b/calc/core.py\n--- a/calc/core.py\n+++ b/calc/core.py\n@@ -1,2 +1,2 @@\n def parse(s):\n-    return s[0]\n+    return s[:1]\n",
            "test_patch": "diff --git a/tests/test_core.py b/tests/test_core.py\n--- a/tests/test_core.py\n+++ b/tests/test_core.py\n@@ -4,2 +4,5 @@\n def test_parse():\n     assert parse('1') == '1'\n+\n+def test_empty():\n+    assert parse('') == ''\n",
            "FAIL_TO_PASS": "[\"tests/test_core.py::test_empty\"]",
            "PASS_TO_PASS": "[\"tests/test_core.py::test_parse\"]",
            "created_at": "2020-01-02T00:00:00Z"
        }),
        json!({
            "instance_id": "acme__calc-2",
            "repo": "acme/calc",
            "base_commit": c2,
            "problem_statement": "divide by zero\nSomething is off with divide, it should probably do something else.",
            "patch": "diff --git a/calc/core.py b/calc/core.py\n--- a/calc/core.py\n+++ b/calc/core.py\n@@ -5,2 +5,4 @@\n def divide(a, b):\n+    if b == 0:\n+        return None\n     return a / b\n",
            "test_patch": "diff --git a/tests/test_core.py b/tests/test_core.py\n--- a/tests/test_core.py\n+++ b/tests/test_core.py\n@@ -4,2 +4,5 @@\n def test_parse():\n     assert parse('1') == '1'\n+\n+def test_divide_zero():\n+    assert divide(1, 0) is None\n",
            "FAIL_TO_PASS": ["tests/test_core.py::test_divide_zero"],
            "PASS_TO_PASS": []
        }),
        json!({
            "instance_id": "acme__strings-7",
            "repo": "acme/strings",
            "base_commit": s1,
            "problem_statement": "Slugger.slugify keeps punctuation\n\n<!-- template -->\n`Slugger().slugify('Hi, there!')` returns `hi,-there!`; expected `hi-there`.",
            "patch": "diff --git a/strings/util.py b/strings/util.py\n--- a/strings/util.py\n+++ b/strings/util.py\n@@ -1,3 +1,6 @@\n+import re\n+\n+\n class Slugger:\n     def slugify(self, text):\n-        return text.lower().replace(' ', '-')\n+        return re.sub(r'[^a-z0-9]+', '-', text.lower()).strip('-')\n",
            "test_patch": "diff --git a/tests/test_util.py b/tests/test_util.py\n--- a/tests/test_util.py\n+++ b/tests/test_util.py\n@@ -4,2 +4,5 @@\n def test_slug():\n     assert Slugger().slugify('A B') == 'a-b'\n+\n+def test_punct():\n+    assert Slugger().slugify('Hi, there!') == 'hi-there'\n",
            "FAIL_TO_PASS": ["tests/test_util.py::test_punct"],
            "PASS_TO_PASS": ["tests/test_util.py::test_slug"]
        }),
    ];
    let dataset = root.join("dataset.jsonl");
    let text: String = rows.iter().map(|r| format!("{r}\n")).collect();
    std::fs::write(&dataset, text).unwrap();
    Fixture { dataset, mirrors }
}

pub fn swelabel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swelabel"))
        .args(args)
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("spawn swelabel")
}

pub fn label_all(fx: &Fixture, out: &Path) -> Output {
    swelabel(&[
        "label",
        "--dataset",
        fx.dataset.to_str().unwrap(),
        "--task",
        "all",
        "--model",
        "stub",
        "--runs",
        "3",
        "--mirror",
        fx.mirrors.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}
