//! Minimal unified-diff reader: which files a patch touches and where its hunks sit.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed diff at line {line}: {reason}")]
pub struct DiffParseError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilePatch {
    /// `None` when the file is created by the patch.
    pub old_path: Option<String>,
    /// `None` when the file is deleted by the patch.
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
}

impl FilePatch {
    /// The path this patch applies to; the pre-image path for deletions.
    pub fn target(&self) -> Option<&str> {
        self.new_path.as_deref().or(self.old_path.as_deref())
    }
}

fn hunk_header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@").unwrap())
}

fn clean_path(raw: &str) -> Option<String> {
    // Drop a trailing timestamp ("path\t2024-01-01 ...").
    let raw = raw.split('\t').next().unwrap_or("").trim_end();
    let raw = raw
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .unwrap_or(raw);
    if raw == "/dev/null" {
        return None;
    }
    let stripped = raw
        .strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw);
    Some(stripped.to_string())
}

fn git_header_paths(rest: &str) -> (Option<String>, Option<String>) {
    match rest.rfind(" b/") {
        Some(idx) => (clean_path(&rest[..idx]), clean_path(&rest[idx + 1..])),
        None => (None, None),
    }
}

/// Parse every file section of a unified diff.
pub fn parse_patch(text: &str) -> Result<Vec<FilePatch>, DiffParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut files: Vec<FilePatch> = Vec::new();
    // Whether the current section came from a `diff --git` line and still awaits ---/+++.
    let mut git_pending = false;
    let mut i = 0;

    while i < lines.len() {
        let line = lines[i];
        if let Some(rest) = line.strip_prefix("diff --git ") {
            let (old_path, new_path) = git_header_paths(rest);
            files.push(FilePatch { old_path, new_path, hunks: Vec::new() });
            git_pending = true;
            i += 1;
        } else if let Some(from) = line.strip_prefix("rename from ") {
            if let Some(f) = files.last_mut() {
                f.old_path = clean_path(from);
            }
            i += 1;
        } else if let Some(to) = line.strip_prefix("rename to ") {
            if let Some(f) = files.last_mut() {
                f.new_path = clean_path(to);
            }
            i += 1;
        } else if line.starts_with("new file mode") && git_pending {
            if let Some(f) = files.last_mut() {
                f.old_path = None;
            }
            i += 1;
        } else if line.starts_with("deleted file mode") && git_pending {
            if let Some(f) = files.last_mut() {
                f.new_path = None;
            }
            i += 1;
        } else if let Some(old) = line.strip_prefix("--- ") {
            let Some(new) = lines.get(i + 1).and_then(|l| l.strip_prefix("+++ ")) else {
                return Err(DiffParseError {
                    line: i + 1,
                    reason: "`---` header without a following `+++` header".into(),
                });
            };
            let old_path = clean_path(old);
            let new_path = clean_path(new);
            if old_path.is_none() && new_path.is_none() {
                return Err(DiffParseError {
                    line: i + 1,
                    reason: "both sides are /dev/null".into(),
                });
            }
            if git_pending {
                let f = files.last_mut().expect("git section exists");
                f.old_path = old_path;
                f.new_path = new_path;
            } else {
                files.push(FilePatch { old_path, new_path, hunks: Vec::new() });
            }
            git_pending = false;
            i += 2;
        } else if line.starts_with("+++ ") {
            return Err(DiffParseError {
                line: i + 1,
                reason: "`+++` header without a preceding `---` header".into(),
            });
        } else if line.starts_with("@@") {
            let Some(current) = files.last_mut() else {
                return Err(DiffParseError { line: i + 1, reason: "hunk before any file header".into() });
            };
            let caps = hunk_header().captures(line).ok_or_else(|| DiffParseError {
                line: i + 1,
                reason: format!("bad hunk header `{line}`"),
            })?;
            let num = |idx: usize, default: usize| -> usize {
                caps.get(idx).map_or(default, |m| m.as_str().parse().unwrap_or(usize::MAX))
            };
            let hunk = Hunk {
                old_start: num(1, 0),
                old_len: num(2, 1),
                new_start: num(3, 0),
                new_len: num(4, 1),
            };
            current.hunks.push(hunk);
            git_pending = false;
            i += 1;
            // Consume the body by count so removed lines such as "--- x" are not read as headers.
            let (mut old_rem, mut new_rem) = (hunk.old_len, hunk.new_len);
            while i < lines.len() && (old_rem > 0 || new_rem > 0) {
                let body = lines[i];
                match body.as_bytes().first() {
                    Some(b' ') | None => {
                        old_rem = old_rem.saturating_sub(1);
                        new_rem = new_rem.saturating_sub(1);
                    }
                    Some(b'-') => old_rem = old_rem.saturating_sub(1),
                    Some(b'+') => new_rem = new_rem.saturating_sub(1),
                    Some(b'\\') => {}
                    _ => break,
                }
                i += 1;
            }
            while i < lines.len() && lines[i].starts_with('\\') {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    Ok(files)
}

/// De-duplicated target paths in order of first appearance.
pub fn patch_files(patch_text: &str) -> Result<Vec<String>, DiffParseError> {
    let mut seen = HashSet::new();
    Ok(parse_patch(patch_text)?
        .iter()
        .filter_map(|f| f.target().map(str::to_string))
        .filter(|p| seen.insert(p.clone()))
        .collect())
}
