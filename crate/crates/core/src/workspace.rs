//! Read-only git checkouts cached by `(repo, base_commit)`.
//!
//! Layout: `<cache_dir>/<owner>__<name>/<sha>/`. A repository source is either a
//! local mirror directory (`<mirror>/<owner>__<name>`, bare or not) or a remote URL
//! prefix such as `https://github.com`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex, OnceLock};

use crate::types::Instance;

#[derive(Debug, thiserror::Error)]
pub enum WorkspaceError {
    #[error("repository `{repo}` unavailable: {reason}")]
    RepoUnavailable { repo: String, reason: String },
    #[error("commit `{commit}` not found in `{repo}`")]
    CommitNotFound { repo: String, commit: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RepoSource {
    /// Directory holding `<owner>__<name>` clones.
    Mirror(PathBuf),
    /// URL prefix; the clone URL is `<prefix>/<owner>/<name>`.
    Remote(String),
}

impl RepoSource {
    fn locate(&self, repo: &str) -> String {
        match self {
            RepoSource::Mirror(dir) => dir.join(repo.replace('/', "__")).display().to_string(),
            RepoSource::Remote(prefix) => format!("{}/{}", prefix.trim_end_matches('/'), repo),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    pub root_path: PathBuf,
    pub repo: String,
    pub checked_out_commit: String,
    /// Always false: callers never write to the tree.
    pub dirty: bool,
}

impl Workspace {
    /// Contents of a tracked file at the checked-out commit, if it exists.
    pub fn read_file(&self, rel: &str) -> Option<String> {
        let path = self.root_path.join(rel);
        if !path.starts_with(&self.root_path) {
            return None;
        }
        std::fs::read(path).ok().map(|b| String::from_utf8_lossy(&b).into_owned())
    }
}

fn git(dir: Option<&Path>, args: &[&str]) -> std::io::Result<Output> {
    let mut cmd = Command::new("git");
    if let Some(d) = dir {
        cmd.arg("-C").arg(d);
    }
    cmd.args(["-c", "advice.detachedHead=false"]);
    cmd.args(args).env("GIT_TERMINAL_PROMPT", "0").output()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).trim().to_string()
}

fn head_of(dir: &Path) -> Option<String> {
    let out = git(Some(dir), &["rev-parse", "HEAD"]).ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

/// One lock per cache entry so concurrent workers never clone the same checkout twice.
fn entry_lock(path: &Path) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>> = OnceLock::new();
    let mut map = LOCKS.get_or_init(Default::default).lock().unwrap();
    map.entry(path.to_path_buf()).or_default().clone()
}

pub fn checkout_workspace(
    instance: &Instance,
    cache_dir: &Path,
    source: &RepoSource,
) -> Result<Workspace, WorkspaceError> {
    let repo = instance.repo.clone();
    let sha = instance.base_commit.clone();
    let root = cache_dir.join(repo.replace('/', "__")).join(&sha);
    let lock = entry_lock(&root);
    let _guard = lock.lock().unwrap();

    let matches_request = |head: &str| head.starts_with(&sha);
    if root.join(".git").exists() {
        if let Some(head) = head_of(&root) {
            if matches_request(&head) {
                return Ok(Workspace { root_path: root, repo, checked_out_commit: head, dirty: false });
            }
        }
        // Stale or half-written entry.
        std::fs::remove_dir_all(&root)?;
    }

    let url = source.locate(&repo);
    if let RepoSource::Mirror(_) = source {
        if !Path::new(&url).exists() {
            return Err(WorkspaceError::RepoUnavailable { repo, reason: format!("no mirror at {url}") });
        }
    }
    std::fs::create_dir_all(root.parent().expect("entry has parent"))?;
    let root_str = root.display().to_string();
    let out = git(None, &["clone", "--quiet", "--no-checkout", &url, &root_str])?;
    if !out.status.success() {
        let _ = std::fs::remove_dir_all(&root);
        return Err(WorkspaceError::RepoUnavailable { repo, reason: stderr(&out) });
    }
    let spec = format!("{sha}^{{commit}}");
    let exists = git(Some(&root), &["cat-file", "-e", &spec])?;
    if !exists.status.success() {
        let _ = std::fs::remove_dir_all(&root);
        return Err(WorkspaceError::CommitNotFound { repo, commit: sha });
    }
    let out = git(Some(&root), &["checkout", "--quiet", "--detach", &sha])?;
    if !out.status.success() {
        let _ = std::fs::remove_dir_all(&root);
        return Err(WorkspaceError::CommitNotFound { repo, commit: sha });
    }
    let head = head_of(&root).ok_or_else(|| WorkspaceError::CommitNotFound {
        repo: repo.clone(),
        commit: sha.clone(),
    })?;
    Ok(Workspace { root_path: root, repo, checked_out_commit: head, dirty: false })
}

/// True when `git status --porcelain` reports no changes.
pub fn is_clean(ws: &Workspace) -> bool {
    git(Some(&ws.root_path), &["status", "--porcelain"])
        .map(|o| o.status.success() && o.stdout.is_empty())
        .unwrap_or(false)
}

/// Paths of tracked files at the checked-out commit, sorted.
pub fn tracked_files(ws: &Workspace) -> Result<Vec<String>, WorkspaceError> {
    let out = git(Some(&ws.root_path), &["ls-files", "-z"])?;
    if !out.status.success() {
        return Err(WorkspaceError::RepoUnavailable { repo: ws.repo.clone(), reason: stderr(&out) });
    }
    let mut files: Vec<String> = out
        .stdout
        .split(|b| *b == 0)
        .filter(|s| !s.is_empty())
        .map(|s| String::from_utf8_lossy(s).into_owned())
        .collect();
    files.sort();
    Ok(files)
}
