//! The structured answer block models are asked to produce:
//!
//! ```text
//! SCORE: 2
//! RATIONALE: free text, possibly
//! over several lines
//! CANDIDATE_SOLUTION: yes
//! COUNTER_EXAMPLE: free text
//! ```
//!
//! usually inside a ``` fence. A field's value runs until the next field line.

use std::sync::OnceLock;

use regex::Regex;

use crate::types::Score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no score in 0..=3 could be recovered from the model output")]
pub struct UnparseableOutput;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnswerBlock {
    pub score: Option<Score>,
    pub rationale: Option<String>,
    pub candidate_solution: Option<bool>,
    pub counter_example: Option<String>,
}

const FIELDS: [&str; 4] = ["SCORE", "RATIONALE", "CANDIDATE_SOLUTION", "COUNTER_EXAMPLE"];

fn field_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*\**(SCORE|RATIONALE|CANDIDATE_SOLUTION|COUNTER_EXAMPLE)\**\s*:\**\s?(.*)$").unwrap()
    })
}

/// Content of the first fenced block, or the whole text when there is none.
fn block_body(text: &str) -> &str {
    let Some(open) = text.find("```") else { return text };
    let after = &text[open + 3..];
    // Skip an info string on the opening fence line.
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

fn parse_yes_no(v: &str) -> Option<bool> {
    match v.trim().trim_matches(|c: char| !c.is_ascii_alphabetic()).to_ascii_lowercase().as_str() {
        "yes" | "true" | "y" => Some(true),
        "no" | "false" | "n" => Some(false),
        _ => None,
    }
}

/// Strict score: the value is exactly one integer in 0..=3 (optionally `n/3`).
pub fn parse_score_value(v: &str) -> Option<Score> {
    let v = v.trim().trim_matches(|c: char| c == '*' || c == '`' || c == '.');
    let v = v.strip_suffix("/3").unwrap_or(v).trim();
    v.parse::<u8>().ok().and_then(|n| Score::new(n).ok())
}

/// Parse the answer block. Returns `None` unless a well-formed `SCORE` field exists.
pub fn parse_block(text: &str) -> Option<AnswerBlock> {
    let body = block_body(text);
    let mut fields: Vec<(&str, Vec<&str>)> = Vec::new();
    for line in body.lines() {
        if let Some(c) = field_re().captures(line) {
            let name = FIELDS.iter().find(|f| **f == &c[1]).unwrap();
            fields.push((name, vec![c.get(2).unwrap().as_str()]));
        } else if let Some((_, lines)) = fields.last_mut() {
            lines.push(line);
        }
    }
    let value = |name: &str| {
        fields
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, lines)| lines.join("\n").trim().to_string())
    };
    let score = parse_score_value(&value("SCORE")?)?;
    Some(AnswerBlock {
        score: Some(score),
        rationale: value("RATIONALE"),
        candidate_solution: value("CANDIDATE_SOLUTION").and_then(|v| parse_yes_no(&v)),
        counter_example: value("COUNTER_EXAMPLE").filter(|v| !is_none_marker(v)),
    })
}

fn is_none_marker(v: &str) -> bool {
    let t = v.trim().trim_end_matches('.').to_ascii_lowercase();
    t.is_empty() || t == "none" || t == "n/a" || t == "-"
}

pub fn render_block(block: &AnswerBlock) -> String {
    let mut out = String::from("```\n");
    if let Some(s) = block.score {
        out.push_str(&format!("SCORE: {s}\n"));
    }
    if let Some(r) = &block.rationale {
        out.push_str(&format!("RATIONALE: {r}\n"));
    }
    if let Some(c) = block.candidate_solution {
        out.push_str(if c { "CANDIDATE_SOLUTION: yes\n" } else { "CANDIDATE_SOLUTION: no\n" });
    }
    if let Some(c) = &block.counter_example {
        out.push_str(&format!("COUNTER_EXAMPLE: {c}\n"));
    }
    out.push_str("```");
    out
}

/// First digit 0-3 that stands alone: not part of a longer number, a decimal, or a word.
pub fn first_standalone_digit(text: &str) -> Option<Score> {
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !('0'..='3').contains(&c) {
            continue;
        }
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        let after_next = chars.get(i + 2).copied();
        let glued_before = prev.is_some_and(|p| p.is_alphanumeric() || p == '_' || p == '.');
        let glued_after = next.is_some_and(|n| {
            n.is_alphanumeric() || n == '_' || (n == '.' && after_next.is_some_and(|a| a.is_ascii_digit()))
        });
        if !glued_before && !glued_after {
            return Score::new(c as u8 - b'0').ok();
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(n: u8) -> Score {
        Score::new(n).unwrap()
    }

    #[test]
    fn fenced_and_bare() {
        let b = parse_block("Thoughts...\n```text\nSCORE: 2\nRATIONALE: line one\nline two\nCOUNTER_EXAMPLE: none\n```\nbye").unwrap();
        assert_eq!(b.score, Some(s(2)));
        assert_eq!(b.rationale.as_deref(), Some("line one\nline two"));
        assert_eq!(b.counter_example, None);
        let b = parse_block("SCORE: 1\nRATIONALE: minor gaps\nCANDIDATE_SOLUTION: no").unwrap();
        assert_eq!((b.score, b.candidate_solution), (Some(s(1)), Some(false)));
        let b = parse_block("**SCORE:** 3/3\n**RATIONALE:** bad").unwrap();
        assert_eq!(b.score, Some(s(3)));
    }

    #[test]
    fn malformed_score_rejected() {
        assert!(parse_block("SCORE: 4\nRATIONALE: x").is_none());
        assert!(parse_block("SCORE: two").is_none());
        assert!(parse_block("RATIONALE: no score").is_none());
    }

    #[test]
    fn standalone_digits() {
        assert_eq!(first_standalone_digit("... I rate this 2 ..."), Some(s(2)));
        assert_eq!(first_standalone_digit("Python 3.11 is used; overall 1."), Some(s(1)));
        assert_eq!(first_standalone_digit("issue #1234 and v2 and 15 mins"), None);
        assert_eq!(first_standalone_digit("the issue is fine"), None);
        assert_eq!(first_standalone_digit("score=0"), Some(s(0)));
    }

    fn free_text() -> impl Strategy<Value = String> {
        "[a-z][a-z ,.()'-]{0,40}(\n[a-z][a-z ,.()'-]{0,40}){0,2}".prop_map(|t| t.trim().to_string())
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(
            score in 0u8..4,
            rationale in free_text(),
            cand in proptest::option::of(any::<bool>()),
            counter in proptest::option::of(free_text()),
        ) {
            let counter = counter.filter(|c| !is_none_marker(c));
            let block = AnswerBlock { score: Some(s(score)), rationale: Some(rationale), candidate_solution: cand, counter_example: counter };
            prop_assert_eq!(parse_block(&render_block(&block)), Some(block));
        }
    }
}
