//! Definition / reference tagging.
//!
//! The built-in tagger recognizes definitions with per-language line patterns and
//! treats every other identifier occurrence as a reference. Universal-ctags can be
//! plugged in for definitions instead.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TagKind {
    Def,
    Ref,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tag {
    pub path: String,
    pub symbol: String,
    pub kind: TagKind,
    /// 1-based.
    pub line: usize,
    /// Trimmed source line of a definition.
    pub signature: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extractor {
    Builtin,
    /// Universal-ctags executable; definitions come from its JSON output.
    Ctags(PathBuf),
}

#[derive(Debug, thiserror::Error)]
pub enum TagError {
    #[error("tag extractor unavailable: {0}")]
    ExtractorUnavailable(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lang {
    Python,
    Rust,
    Script,
    Go,
    Java,
}

fn lang_of(path: &str) -> Option<Lang> {
    let ext = path.rsplit_once('.')?.1;
    Some(match ext {
        "py" | "pyi" => Lang::Python,
        "rs" => Lang::Rust,
        "js" | "jsx" | "ts" | "tsx" | "mjs" | "cjs" => Lang::Script,
        "go" => Lang::Go,
        "java" | "kt" | "scala" | "cs" => Lang::Java,
        _ => return None,
    })
}

struct LangRules {
    defs: Vec<Regex>,
    keywords: HashSet<&'static str>,
}

fn rules(lang: Lang) -> &'static LangRules {
    static PY: OnceLock<LangRules> = OnceLock::new();
    static RS: OnceLock<LangRules> = OnceLock::new();
    static JS: OnceLock<LangRules> = OnceLock::new();
    static GO: OnceLock<LangRules> = OnceLock::new();
    static JV: OnceLock<LangRules> = OnceLock::new();
    let build = |defs: &[&str], kw: &'static str| LangRules {
        defs: defs.iter().map(|d| Regex::new(d).unwrap()).collect(),
        keywords: kw.split_whitespace().collect(),
    };
    match lang {
        Lang::Python => PY.get_or_init(|| {
            build(
                &[r"^\s*(?:async\s+)?def\s+([A-Za-z_]\w*)", r"^\s*class\s+([A-Za-z_]\w*)"],
                "False None True and as assert async await break class continue def del elif else except \
                 finally for from global if import in is lambda nonlocal not or pass raise return try while \
                 with yield self cls print",
            )
        }),
        Lang::Rust => RS.get_or_init(|| {
            build(
                &[
                    r#"^\s*(?:pub(?:\([^)]*\))?\s+)?(?:(?:async|const|unsafe|extern\s+"[^"]*")\s+)*fn\s+([A-Za-z_]\w*)"#,
                    r"^\s*(?:pub(?:\([^)]*\))?\s+)?(?:struct|enum|trait|type|mod|union)\s+([A-Za-z_]\w*)",
                    r"^\s*macro_rules!\s*([A-Za-z_]\w*)",
                ],
                "as async await break const continue crate dyn else enum extern false fn for if impl in let \
                 loop match mod move mut pub ref return self Self static struct super trait true type unsafe \
                 use where while",
            )
        }),
        Lang::Script => JS.get_or_init(|| {
            build(
                &[
                    r"^\s*(?:export\s+)?(?:default\s+)?(?:async\s+)?function\s*\*?\s*([A-Za-z_$][\w$]*)",
                    r"^\s*(?:export\s+)?(?:default\s+)?(?:abstract\s+)?class\s+([A-Za-z_$][\w$]*)",
                    r"^\s*(?:export\s+)?(?:const|let|var)\s+([A-Za-z_$][\w$]*)\s*=\s*(?:async\s*)?(?:\([^)]*\)|[A-Za-z_$][\w$]*)\s*=>",
                ],
                "break case catch class const continue debugger default delete do else export extends false \
                 finally for function if import in instanceof let new null return super switch this throw \
                 true try typeof var void while with yield async await",
            )
        }),
        Lang::Go => GO.get_or_init(|| {
            build(
                &[r"^func\s+(?:\([^)]*\)\s*)?([A-Za-z_]\w*)", r"^type\s+([A-Za-z_]\w*)"],
                "break case chan const continue default defer else fallthrough for func go goto if import \
                 interface map package range return select struct switch type var nil true false",
            )
        }),
        Lang::Java => JV.get_or_init(|| {
            build(
                &[r"^\s*(?:(?:public|private|protected|static|final|abstract|sealed|open|data)\s+)*(?:class|interface|enum|record|object)\s+([A-Za-z_]\w*)"],
                "abstract class else enum extends final for if implements import interface new null package \
                 private protected public return static super this throw true false try void while",
            )
        }),
    }
}

fn ident_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z_][A-Za-z0-9_]*").unwrap())
}

fn comment_prefix(lang: Lang) -> &'static str {
    match lang {
        Lang::Python => "#",
        _ => "//",
    }
}

/// Whether `path` can be tagged by the built-in tagger.
pub fn is_taggable(path: &str) -> bool {
    lang_of(path).is_some()
}

/// Tag one file's source text with the built-in rules.
pub fn tag_source(path: &str, source: &str) -> Vec<Tag> {
    let Some(lang) = lang_of(path) else {
        return Vec::new();
    };
    let rules = rules(lang);
    let mut tags = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim_start().starts_with(comment_prefix(lang)) {
            continue;
        }
        let def = rules.defs.iter().find_map(|re| re.captures(line)).and_then(|c| c.get(1));
        if let Some(m) = def {
            tags.push(Tag {
                path: path.to_string(),
                symbol: m.as_str().to_string(),
                kind: TagKind::Def,
                line: lineno,
                signature: Some(line.trim().to_string()),
            });
        }
        let def_span = def.map(|m| m.range());
        for m in ident_re().find_iter(line) {
            if def_span.as_ref() == Some(&m.range()) || rules.keywords.contains(m.as_str()) {
                continue;
            }
            tags.push(Tag {
                path: path.to_string(),
                symbol: m.as_str().to_string(),
                kind: TagKind::Ref,
                line: lineno,
                signature: None,
            });
        }
    }
    tags
}

#[derive(Deserialize)]
struct CtagsEntry {
    #[serde(rename = "_type")]
    kind: String,
    name: String,
    path: String,
    line: Option<usize>,
}

/// Definitions from universal-ctags for the given files (paths relative to `root`).
pub fn ctags_defs(program: &Path, root: &Path, files: &[String]) -> Result<Vec<Tag>, TagError> {
    let probe = Command::new(program).arg("--version").output();
    match probe {
        Ok(o) if o.status.success() => {}
        _ => return Err(TagError::ExtractorUnavailable(program.display().to_string())),
    }
    if files.is_empty() {
        return Ok(Vec::new());
    }
    let out = Command::new(program)
        .current_dir(root)
        .args(["--output-format=json", "--fields=+n", "-f", "-"])
        .args(files)
        .output()?;
    if !out.status.success() {
        return Err(TagError::ExtractorUnavailable(String::from_utf8_lossy(&out.stderr).into_owned()));
    }
    let mut defs = Vec::new();
    let mut sources: std::collections::HashMap<String, Vec<String>> = Default::default();
    for line in String::from_utf8_lossy(&out.stdout).lines() {
        let Ok(e) = serde_json::from_str::<CtagsEntry>(line) else { continue };
        if e.kind != "tag" {
            continue;
        }
        let Some(lineno) = e.line.filter(|l| *l >= 1) else { continue };
        let lines = sources.entry(e.path.clone()).or_insert_with(|| {
            std::fs::read_to_string(root.join(&e.path))
                .map(|s| s.lines().map(str::to_string).collect())
                .unwrap_or_default()
        });
        let signature = lines.get(lineno - 1).map(|l| l.trim().to_string()).unwrap_or_else(|| e.name.clone());
        defs.push(Tag { path: e.path, symbol: e.name, kind: TagKind::Def, line: lineno, signature: Some(signature) });
    }
    Ok(defs)
}

/// Canonical tag order: path, line, defs before refs, symbol.
pub fn sort_tags(tags: &mut [Tag]) {
    tags.sort_by(|a, b| {
        (a.path.as_str(), a.line, a.kind, a.symbol.as_str()).cmp(&(b.path.as_str(), b.line, b.kind, b.symbol.as_str()))
    });
}
