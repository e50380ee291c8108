//! Line-delimited JSON datasets (SWE-bench column names) and label record files.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::diff;
use crate::types::{Instance, LabelRecord};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate instance_id `{0}`")]
    DuplicateId(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

const KNOWN: &[&str] = &[
    "instance_id",
    "repo",
    "base_commit",
    "problem_statement",
    "issue_title",
    "issue_body",
    "patch",
    "test_patch",
    "FAIL_TO_PASS",
    "PASS_TO_PASS",
];

fn take_string(obj: &mut Map<String, Value>, key: &str) -> Result<Option<String>, String> {
    match obj.shift_remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(format!("`{key}` must be a string, got {other}")),
    }
}

/// SWE-bench stores test lists either as JSON arrays or as JSON-encoded strings.
fn take_tests(obj: &mut Map<String, Value>, key: &str) -> Result<Vec<String>, String> {
    let as_list = |v: Value| -> Result<Vec<String>, String> {
        match v {
            Value::Array(items) => items
                .into_iter()
                .map(|i| match i {
                    Value::String(s) => Ok(s),
                    other => Err(format!("`{key}` entries must be strings, got {other}")),
                })
                .collect(),
            other => Err(format!("`{key}` must be a list, got {other}")),
        }
    };
    match obj.shift_remove(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::String(s)) if s.trim().is_empty() => Ok(Vec::new()),
        Some(Value::String(s)) => {
            let inner: Value =
                serde_json::from_str(&s).map_err(|e| format!("`{key}` is not an encoded list: {e}"))?;
            as_list(inner)
        }
        Some(v) => as_list(v),
    }
}

fn is_hex_sha(s: &str) -> bool {
    (7..=40).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Split a `problem_statement` into title (first line) and body (the rest).
pub fn split_problem_statement(statement: &str) -> (String, String) {
    let mut parts = statement.splitn(2, '\n');
    let title = parts.next().unwrap_or("").trim().to_string();
    let body = parts.next().unwrap_or("").trim_start_matches(['\n', '\r']).to_string();
    (title, body)
}

/// Parse one dataset line into an [`Instance`].
pub fn parse_instance(line: &str) -> Result<Instance, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let Value::Object(mut obj) = value else {
        return Err("record is not an object".into());
    };
    let instance_id = take_string(&mut obj, "instance_id")?
        .filter(|s| !s.is_empty())
        .ok_or("missing instance_id")?;
    let repo = take_string(&mut obj, "repo")?.ok_or("missing repo")?;
    if repo.split('/').count() != 2 || repo.split('/').any(str::is_empty) {
        return Err(format!("repo `{repo}` is not owner/name"));
    }
    let base_commit = take_string(&mut obj, "base_commit")?.ok_or("missing base_commit")?;
    if !is_hex_sha(&base_commit) {
        return Err(format!("base_commit `{base_commit}` is not 7-40 hex chars"));
    }
    let statement = take_string(&mut obj, "problem_statement")?;
    let title = take_string(&mut obj, "issue_title")?;
    let body = take_string(&mut obj, "issue_body")?;
    let (issue_title, issue_body) = match (title, body, statement) {
        (Some(t), b, _) => (t, b.unwrap_or_default()),
        (None, _, Some(s)) => split_problem_statement(&s),
        (None, _, None) => return Err("missing problem_statement".into()),
    };
    let gold_patch = take_string(&mut obj, "patch")?.unwrap_or_default();
    let test_patch = take_string(&mut obj, "test_patch")?.unwrap_or_default();
    diff::parse_patch(&gold_patch).map_err(|e| format!("patch: {e}"))?;
    diff::parse_patch(&test_patch).map_err(|e| format!("test_patch: {e}"))?;
    let fail_to_pass = take_tests(&mut obj, "FAIL_TO_PASS")?;
    let pass_to_pass = take_tests(&mut obj, "PASS_TO_PASS")?;
    debug_assert!(KNOWN.iter().all(|k| !obj.contains_key(*k)));

    Ok(Instance {
        instance_id,
        repo,
        base_commit,
        issue_title,
        issue_body,
        gold_patch,
        test_patch,
        fail_to_pass,
        pass_to_pass,
        extras: obj,
    })
}

/// Serialize an instance back to its SWE-bench-shaped record, extras included.
pub fn instance_to_value(inst: &Instance) -> Value {
    let mut obj = Map::new();
    obj.insert("instance_id".into(), inst.instance_id.clone().into());
    obj.insert("repo".into(), inst.repo.clone().into());
    obj.insert("base_commit".into(), inst.base_commit.clone().into());
    obj.insert("issue_title".into(), inst.issue_title.clone().into());
    obj.insert("issue_body".into(), inst.issue_body.clone().into());
    obj.insert("patch".into(), inst.gold_patch.clone().into());
    obj.insert("test_patch".into(), inst.test_patch.clone().into());
    obj.insert("FAIL_TO_PASS".into(), inst.fail_to_pass.clone().into());
    obj.insert("PASS_TO_PASS".into(), inst.pass_to_pass.clone().into());
    for (k, v) in &inst.extras {
        obj.insert(k.clone(), v.clone());
    }
    Value::Object(obj)
}

pub fn load_instances(path: &Path) -> Result<Vec<Instance>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = parse_instance(&line)
            .map_err(|reason| DatasetError::MalformedRecord { line: idx + 1, reason })?;
        if !seen.insert(inst.instance_id.clone()) {
            return Err(DatasetError::DuplicateId(inst.instance_id));
        }
        out.push(inst);
    }
    Ok(out)
}

/// Write any serializable items as one JSON document per line.
pub fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Read a JSON-lines file; blank lines are skipped.
pub fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| {
            serde_json::from_str(l)
                .map_err(|e| DatasetError::MalformedRecord { line: idx + 1, reason: e.to_string() })
        })
        .collect()
}

pub fn write_records(path: &Path, records: &[LabelRecord]) -> Result<(), DatasetError> {
    write_lines(path, records)
}

pub fn read_records(path: &Path) -> Result<Vec<LabelRecord>, DatasetError> {
    read_lines(path)
}
