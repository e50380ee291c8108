//! Issue-text cleaning: strip markdown structure, keep the words.
//!
//! Fenced code blocks become a `CODE:` line followed by the code indented four
//! spaces; such regions and inline code spans are never touched by the rules.
//! The rule pass repeats until the text stops changing, so cleaning is idempotent.

use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;
use sha2::{Digest, Sha256};

const DEFAULT_RULES: &str = include_str!("../assets/clean_rules.toml");
const CODE_MARKER: &str = "CODE:";
const CODE_INDENT: &str = "    ";
const LONG_ISSUE_CHARS: usize = 20_000;
const MAX_PASSES: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("rule file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("rule `{name}`: {source}")]
    Pattern {
        name: String,
        #[source]
        source: regex::Error,
    },
    #[error("rule `{0}`: unknown action (expected drop or keep)")]
    Action(String),
}

#[derive(Debug, Deserialize)]
struct RuleFile {
    version: String,
    #[serde(rename = "rule")]
    rules: Vec<RuleEntry>,
}

#[derive(Debug, Deserialize)]
struct RuleEntry {
    name: String,
    pattern: String,
    action: String,
    keep: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pattern: Regex,
    /// Empty for drop rules.
    replacement: String,
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    pub version: String,
    /// Hex SHA-256 of the rule file text.
    pub hash: String,
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn from_toml(text: &str) -> Result<Self, RuleError> {
        let file: RuleFile = toml::from_str(text)?;
        let rules = file
            .rules
            .into_iter()
            .map(|e| {
                let pattern = Regex::new(&e.pattern)
                    .map_err(|source| RuleError::Pattern { name: e.name.clone(), source })?;
                let replacement = match e.action.as_str() {
                    "drop" => String::new(),
                    "keep" => e.keep.unwrap_or_else(|| "${text}".to_string()),
                    _ => return Err(RuleError::Action(e.name)),
                };
                Ok(Rule { name: e.name, pattern, replacement })
            })
            .collect::<Result<_, _>>()?;
        Ok(RuleSet {
            version: file.version,
            hash: hex::encode(Sha256::digest(text.as_bytes())),
            rules,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet::from_toml(DEFAULT_RULES).expect("bundled rules are valid")
    }
}

fn default_rules() -> &'static RuleSet {
    static RULES: OnceLock<RuleSet> = OnceLock::new();
    RULES.get_or_init(RuleSet::default)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanIssue {
    pub title: String,
    pub body: String,
    pub removed_spans: usize,
}

enum Segment {
    Text(String),
    /// Already in `CODE:` form.
    Code(String),
}

fn fence_of(line: &str) -> Option<&'static str> {
    let t = line.trim_start();
    if t.starts_with("```") {
        Some("```")
    } else if t.starts_with("~~~") {
        Some("~~~")
    } else {
        None
    }
}

/// Split into prose and protected code, converting fenced blocks. Returns fence count.
fn segment(text: &str) -> (Vec<Segment>, usize) {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut prose: Vec<&str> = Vec::new();
    let mut fences = 0;
    let mut i = 0;
    let flush = |prose: &mut Vec<&str>, out: &mut Vec<Segment>| {
        if !prose.is_empty() {
            out.push(Segment::Text(prose.join("\n")));
            prose.clear();
        }
    };
    while i < lines.len() {
        let line = lines[i];
        if let Some(fence) = fence_of(line) {
            flush(&mut prose, &mut out);
            fences += 1;
            let mut code = vec![CODE_MARKER.to_string()];
            i += 1;
            while i < lines.len() && !lines[i].trim_start().starts_with(fence) {
                code.push(format!("{CODE_INDENT}{}", lines[i]));
                i += 1;
            }
            i += 1; // closing fence, if any
            out.push(Segment::Code(code.join("\n")));
        } else if line == CODE_MARKER {
            flush(&mut prose, &mut out);
            let mut code = vec![line.to_string()];
            i += 1;
            while i < lines.len() && lines[i].starts_with(CODE_INDENT) {
                code.push(lines[i].to_string());
                i += 1;
            }
            out.push(Segment::Code(code.join("\n")));
        } else {
            prose.push(line);
            i += 1;
        }
    }
    flush(&mut prose, &mut out);
    (out, fences)
}

fn inline_code() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"`[^`\n]+`").unwrap())
}

fn placeholder() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new("\u{E000}(\\d+)\u{E001}").unwrap())
}

fn normalize_whitespace(text: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    for line in text.lines().map(str::trim_end) {
        if line.is_empty() && out.last().is_none_or(|l: &&str| l.is_empty()) {
            continue;
        }
        out.push(line);
    }
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    out.join("\n")
}

/// One rule pass over prose, inline code shielded. Returns (text, matches).
fn apply_rules(rules: &RuleSet, text: &str) -> (String, usize) {
    let mut spans: Vec<String> = Vec::new();
    let mut shielded = inline_code()
        .replace_all(text, |c: &regex::Captures| {
            spans.push(c[0].to_string());
            format!("\u{E000}{}\u{E001}", spans.len() - 1)
        })
        .into_owned();
    let mut removed = 0;
    for rule in rules.rules() {
        let hits = rule.pattern.find_iter(&shielded).count();
        if hits > 0 {
            removed += hits;
            shielded = rule.pattern.replace_all(&shielded, rule.replacement.as_str()).into_owned();
        }
    }
    let restored = placeholder()
        .replace_all(&shielded, |c: &regex::Captures| spans[c[1].parse::<usize>().unwrap()].clone())
        .into_owned();
    (restored, removed)
}

fn clean_text(rules: &RuleSet, text: &str) -> (String, usize) {
    let mut current = text.replace("\r\n", "\n");
    let mut removed = 0;
    for _ in 0..MAX_PASSES {
        let (segments, fences) = segment(&current);
        removed += fences;
        let mut parts = Vec::with_capacity(segments.len());
        for seg in segments {
            match seg {
                Segment::Text(t) => {
                    let (cleaned, n) = apply_rules(rules, &t);
                    removed += n;
                    let cleaned = normalize_whitespace(&cleaned);
                    if !cleaned.is_empty() {
                        parts.push(cleaned);
                    }
                }
                Segment::Code(c) => parts.push(c),
            }
        }
        let next = parts.join("\n");
        let next = normalize_outside_code(&next);
        if next == current {
            break;
        }
        current = next;
    }
    (current, removed)
}

/// Collapse blank-line runs and trim, leaving `CODE:` regions byte-for-byte.
fn normalize_outside_code(text: &str) -> String {
    let (segments, _) = segment(text);
    let mut out: Vec<String> = Vec::new();
    for seg in segments {
        match seg {
            Segment::Text(t) => {
                let n = normalize_whitespace(&t);
                let n = n.trim_start_matches('\n');
                if !n.is_empty() {
                    out.push(n.to_string());
                }
            }
            Segment::Code(c) => out.push(c),
        }
    }
    out.join("\n")
}

/// Clean with the bundled rule set.
pub fn clean_issue(title: &str, body: &str) -> CleanIssue {
    clean_issue_with(default_rules(), title, body)
}

pub fn clean_issue_with(rules: &RuleSet, title: &str, body: &str) -> CleanIssue {
    if title.len() + body.len() > LONG_ISSUE_CHARS {
        log::warn!(
            "issue text is {} characters (over {LONG_ISSUE_CHARS}); not truncated",
            title.len() + body.len()
        );
    }
    let (title_clean, t_removed) = clean_text(rules, title);
    let title_clean = title_clean
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    let (body_clean, b_removed) = clean_text(rules, body);
    CleanIssue { title: title_clean, body: body_clean, removed_spans: t_removed + b_removed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_heading_and_emphasis() {
        let c = clean_issue("Crash", "## Bug\n**crash** on `run()`");
        assert_eq!(c.body, "Bug\ncrash on `run()`");
        assert_eq!(c.removed_spans, 2);
    }

    #[test]
    fn comment_only_body() {
        let c = clean_issue("T", "<!-- Please fill in the template -->");
        assert_eq!(c.body, "");
        assert_eq!(c.removed_spans, 1);
    }

    #[test]
    fn plain_text_is_unchanged() {
        let body = "Calling foo() raises ValueError.\n\nSteps: run it twice.";
        let c = clean_issue("Plain title", body);
        assert_eq!(c.body, body);
        assert_eq!(c.title, "Plain title");
        assert_eq!(c.removed_spans, 0);
    }

    #[test]
    fn code_fence_kept_with_prefix() {
        let c = clean_issue("t", "Repro:\n```python\nf(**kwargs)\n\nx = *a*\n```\nDone");
        assert_eq!(c.body, "Repro:\nCODE:\n    f(**kwargs)\n    \n    x = *a*\nDone");
        assert_eq!(clean_issue("t", &c.body).body, c.body);
    }

    #[test]
    fn images_badges_links_urls() {
        let body = "[![ci](https://x/badge.svg)](https://x) ![shot](a.png)\nSee [docs](https://d.org/p) or https://e.org/q?a=1";
        let c = clean_issue("t", body);
        assert_eq!(c.body, "See docs (https://d.org/p) or https://e.org/q?a=1");
    }

    #[test]
    fn python_stars_survive() {
        let c = clean_issue("t", "def f(*args, **kwargs) fails");
        assert_eq!(c.body, "def f(*args, **kwargs) fails");
    }

    #[test]
    fn blockquote_rule_and_blank_runs() {
        let c = clean_issue("t", "> quoted\n> > deeper\n\n\n\n---\n\nafter");
        assert_eq!(c.body, "quoted\ndeeper\n\nafter");
    }

    #[test]
    fn custom_rule_file() {
        let rules = RuleSet::from_toml(
            "version = \"x\"\n[[rule]]\nname = \"ticket\"\npattern = 'JIRA-\\d+'\naction = \"drop\"\n",
        )
        .unwrap();
        let c = clean_issue_with(&rules, "t", "fix JIRA-12 now");
        assert_eq!(c.body, "fix  now");
        assert!(RuleSet::from_toml("version = \"x\"\n[[rule]]\nname=\"a\"\npattern='('\naction=\"drop\"\n").is_err());
        assert!(RuleSet::from_toml("version = \"x\"\n[[rule]]\nname=\"a\"\npattern='a'\naction=\"zap\"\n").is_err());
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-z]{1,8}"
    }

    fn decorated() -> impl Strategy<Value = String> {
        (word(), 0..8usize).prop_map(|(w, k)| match k {
            0 => format!("**{w}**"),
            1 => format!("*{w}*"),
            2 => format!("`{w}`"),
            3 => format!("~~{w}~~"),
            4 => format!("[{w}](https://x.org/{w})"),
            _ => w,
        })
    }

    fn line() -> impl Strategy<Value = String> {
        (proptest::collection::vec(decorated(), 1..6), 0..6usize).prop_map(|(ws, k)| {
            let text = ws.join(" ");
            match k {
                0 => format!("## {text}"),
                1 => format!("> {text}"),
                2 => "---".to_string(),
                3 => format!("<!-- {text} -->"),
                4 => String::new(),
                _ => text,
            }
        })
    }

    fn document() -> impl Strategy<Value = String> {
        proptest::collection::vec(line(), 0..10).prop_map(|ls| ls.join("\n"))
    }

    proptest! {
        #[test]
        fn idempotent(body in document(), extra in proptest::option::of("[ -~\n]{0,60}")) {
            let body = match extra { Some(e) => format!("{body}\n{e}"), None => body };
            let once = clean_issue("t", &body);
            let twice = clean_issue("t", &once.body);
            prop_assert_eq!(once.body, twice.body);
        }

        #[test]
        fn words_outside_comments_survive(body in document()) {
            let c = clean_issue("t", &body);
            for l in body.lines().filter(|l| !l.starts_with("<!--")) {
                for w in l.split(|ch: char| !ch.is_ascii_alphanumeric()).filter(|w| !w.is_empty()) {
                    prop_assert!(c.body.contains(w), "lost `{}` from {:?} -> {:?}", w, body, c.body);
                }
            }
        }
    }
}
