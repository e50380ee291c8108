//! Prompt templates with named `{slot}` placeholders.
//!
//! Every template ships as a bundled text file and can be replaced by a file of the
//! same name in a template directory. Hashes of the texts actually used are recorded
//! with each label.

use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use sha2::{Digest, Sha256};

use crate::types::Task;

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("template `{template}` has slot {{{slot}}} with no value")]
    MissingSlot { template: String, slot: String },
    #[error("checklist is empty")]
    EmptyChecklist,
    #[error("reading template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn slot_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").unwrap())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub text: String,
    pub hash: String,
}

impl Template {
    pub fn new(name: &str, text: &str) -> Self {
        Template { name: name.to_string(), text: text.to_string(), hash: sha256_hex(text) }
    }

    /// Slot names in order of first appearance.
    pub fn slots(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in slot_re().captures_iter(&self.text) {
            if !out.iter().any(|s| s == &c[1]) {
                out.push(c[1].to_string());
            }
        }
        out
    }

    /// Substitute every slot in one pass; inserted values are never re-scanned.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
        let mut last = 0;
        for c in slot_re().captures_iter(&self.text) {
            let whole = c.get(0).unwrap();
            let name = &c[1];
            let value = values.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).ok_or_else(|| {
                TemplateError::MissingSlot { template: self.name.clone(), slot: name.to_string() }
            })?;
            out.push_str(&self.text[last..whole.start()]);
            out.push_str(value);
            last = whole.end();
        }
        out.push_str(&self.text[last..]);
        Ok(out)
    }
}

/// Ordered criteria the clarity prompt asks the model to work through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationaleChecklist {
    pub items: Vec<String>,
    pub hash: String,
}

impl RationaleChecklist {
    /// One criterion per non-blank line; a leading `- ` is dropped.
    pub fn from_text(text: &str) -> Result<Self, TemplateError> {
        let items: Vec<String> = text
            .lines()
            .map(|l| l.trim().trim_start_matches("- ").trim())
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        Self::new(items)
    }

    pub fn new(items: Vec<String>) -> Result<Self, TemplateError> {
        if items.is_empty() {
            return Err(TemplateError::EmptyChecklist);
        }
        let hash = sha256_hex(&items.join("\n"));
        Ok(RationaleChecklist { items, hash })
    }

    /// Prompt form: one `- item` line per criterion.
    pub fn render(&self) -> String {
        self.items.iter().map(|i| format!("- {i}")).collect::<Vec<_>>().join("\n")
    }
}

impl Default for RationaleChecklist {
    fn default() -> Self {
        Self::from_text(include_str!("../assets/templates/checklist.txt")).expect("bundled checklist")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub ica: Template,
    pub ica_scale: Template,
    pub tca_skeleton: Template,
    pub tca_task: Template,
    pub tca_scale: Template,
    pub difficulty_task: Template,
    pub difficulty_scale: Template,
    pub aux_extract: Template,
}

const BUNDLED: [(&str, &str); 8] = [
    ("ica", include_str!("../assets/templates/ica.txt")),
    ("ica_scale", include_str!("../assets/templates/ica_scale.txt")),
    ("tca_skeleton", include_str!("../assets/templates/tca_skeleton.txt")),
    ("tca_task", include_str!("../assets/templates/tca_task.txt")),
    ("tca_scale", include_str!("../assets/templates/tca_scale.txt")),
    ("difficulty_task", include_str!("../assets/templates/difficulty_task.txt")),
    ("difficulty_scale", include_str!("../assets/templates/difficulty_scale.txt")),
    ("aux_extract", include_str!("../assets/templates/aux_extract.txt")),
];

impl Default for PromptSet {
    fn default() -> Self {
        Self::from_lookup(|name| BUNDLED.iter().find(|(n, _)| *n == name).unwrap().1.to_string())
    }
}

impl PromptSet {
    fn from_lookup(mut get: impl FnMut(&str) -> String) -> Self {
        let mut t = |name: &str| {
            let text = get(name);
            Template::new(name, text.trim_end_matches('\n'))
        };
        PromptSet {
            ica: t("ica"),
            ica_scale: t("ica_scale"),
            tca_skeleton: t("tca_skeleton"),
            tca_task: t("tca_task"),
            tca_scale: t("tca_scale"),
            difficulty_task: t("difficulty_task"),
            difficulty_scale: t("difficulty_scale"),
            aux_extract: t("aux_extract"),
        }
    }

    /// Bundled templates, each replaced by `<dir>/<name>.txt` when that file exists.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut err = None;
        let set = Self::from_lookup(|name| {
            let path = dir.join(format!("{name}.txt"));
            let bundled = BUNDLED.iter().find(|(n, _)| *n == name).unwrap().1;
            if !path.exists() {
                return bundled.to_string();
            }
            std::fs::read_to_string(&path).unwrap_or_else(|source| {
                err.get_or_insert(TemplateError::Io { path: path.display().to_string(), source });
                bundled.to_string()
            })
        });
        match err {
            Some(e) => Err(e),
            None => Ok(set),
        }
    }

    /// Task description and scale sections for the repository-backed tasks.
    pub fn task_sections(&self, task: Task) -> (&Template, &Template) {
        match task {
            Task::Difficulty => (&self.difficulty_task, &self.difficulty_scale),
            _ => (&self.tca_task, &self.tca_scale),
        }
    }

    /// Combined hash of every template a task's prompts depend on.
    pub fn hash_for(&self, task: Task) -> String {
        let parts: Vec<&Template> = match task {
            Task::Ica => vec![&self.ica, &self.ica_scale],
            Task::Tca => vec![&self.tca_skeleton, &self.tca_task, &self.tca_scale, &self.aux_extract],
            Task::Difficulty => {
                vec![&self.tca_skeleton, &self.difficulty_task, &self.difficulty_scale, &self.aux_extract]
            }
        };
        sha256_hex(&parts.iter().map(|t| t.hash.as_str()).collect::<Vec<_>>().join(":"))
    }
}
