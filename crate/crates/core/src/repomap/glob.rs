//! Path globs (`*`, `**`, `?`, `[..]`, `{a,b}`) compiled to anchored regexes.

use regex::Regex;

#[derive(Debug, Clone)]
pub struct GlobSet {
    patterns: Vec<Regex>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid glob `{0}`")]
pub struct GlobError(pub String);

fn translate(glob: &str) -> Result<String, GlobError> {
    let chars: Vec<char> = glob.chars().collect();
    let mut re = String::from("^");
    let mut i = 0;
    let mut in_alt = false;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '*' if chars.get(i + 1) == Some(&'*') => {
                if chars.get(i + 2) == Some(&'/') {
                    re.push_str("(?:.*/)?");
                    i += 3;
                } else {
                    re.push_str(".*");
                    i += 2;
                }
                continue;
            }
            '*' => re.push_str("[^/]*"),
            '?' => re.push_str("[^/]"),
            '[' => {
                let end = chars[i..].iter().position(|&ch| ch == ']').ok_or_else(|| GlobError(glob.into()))?;
                let class: String = chars[i + 1..i + end].iter().collect();
                let class = class.strip_prefix('!').map(|c| format!("^{c}")).unwrap_or(class);
                re.push('[');
                re.push_str(&class);
                re.push(']');
                i += end + 1;
                continue;
            }
            '{' if !in_alt => {
                in_alt = true;
                re.push_str("(?:");
            }
            '}' if in_alt => {
                in_alt = false;
                re.push(')');
            }
            ',' if in_alt => re.push('|'),
            other => re.push_str(&regex::escape(&other.to_string())),
        }
        i += 1;
    }
    if in_alt {
        return Err(GlobError(glob.into()));
    }
    re.push('$');
    Ok(re)
}

impl GlobSet {
    pub fn new<S: AsRef<str>>(globs: &[S]) -> Result<Self, GlobError> {
        let patterns = globs
            .iter()
            .map(|g| {
                let re = translate(g.as_ref())?;
                Regex::new(&re).map_err(|_| GlobError(g.as_ref().to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(GlobSet { patterns })
    }

    pub fn is_match(&self, path: &str) -> bool {
        self.patterns.iter().any(|p| p.is_match(path))
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}
