//! Ranked, token-budgeted repository maps used as prompt context.
//!
//! Pipeline: [`RepoMapper::extract_tags`] → [`build_graph`] → [`rank`] → [`render_map`].

pub mod glob;
pub mod graph;
pub mod rank;
pub mod render;
pub mod tags;

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock, RwLock};

use regex::Regex;
use walkdir::WalkDir;

pub use glob::{GlobError, GlobSet};
pub use graph::{build_graph, RefGraph};
pub use rank::{rank, RankConfig, RankError, RankedSymbol, Ranking};
pub use render::{estimate_tokens, render_map, ByteEstimate, RepoMapText, SymbolRef, TokenCounter};
pub use tags::{Extractor, Tag, TagError, TagKind};

pub const DEFAULT_MAP_BUDGET: usize = 1024;

#[derive(Debug, thiserror::Error)]
pub enum RepoMapError {
    #[error(transparent)]
    Tags(#[from] TagError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Glob(#[from] GlobError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub extractor: Extractor,
    pub rank: RankConfig,
    /// Larger files are not tagged.
    pub max_file_bytes: u64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            include: ["**/*.py", "**/*.pyi", "**/*.rs", "**/*.{js,jsx,ts,tsx,mjs,cjs}", "**/*.go", "**/*.{java,kt,scala,cs}"]
                .map(String::from)
                .to_vec(),
            exclude: ["**/.git/**", "**/node_modules/**", "**/vendor/**", "**/third_party/**", "**/site-packages/**"]
                .map(String::from)
                .to_vec(),
            extractor: Extractor::Builtin,
            rank: RankConfig::default(),
            max_file_bytes: 1 << 20,
        }
    }
}

/// Builds maps; counts tag extractions and caches tags per `(commit, file)`.
pub struct RepoMapper {
    config: MapConfig,
    include: GlobSet,
    exclude: GlobSet,
    counter: Arc<dyn TokenCounter>,
    extractions: AtomicUsize,
    cache: RwLock<HashMap<(String, String), Arc<Vec<Tag>>>>,
}

impl RepoMapper {
    pub fn new(config: MapConfig) -> Result<Self, RepoMapError> {
        Ok(RepoMapper {
            include: GlobSet::new(&config.include)?,
            exclude: GlobSet::new(&config.exclude)?,
            config,
            counter: Arc::new(ByteEstimate),
            extractions: AtomicUsize::new(0),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn with_token_counter(mut self, counter: Arc<dyn TokenCounter>) -> Self {
        self.counter = counter;
        self
    }

    pub fn config(&self) -> &MapConfig {
        &self.config
    }

    pub fn token_counter(&self) -> &dyn TokenCounter {
        self.counter.as_ref()
    }

    /// Number of [`RepoMapper::extract_tags`] calls so far.
    pub fn extraction_count(&self) -> usize {
        self.extractions.load(Ordering::SeqCst)
    }

    fn candidate_files(&self, root: &Path) -> Vec<String> {
        let mut files: Vec<String> = WalkDir::new(root)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| e.file_name() != ".git")
            .filter_map(Result::ok)
            .filter(|e| e.file_type().is_file())
            .filter(|e| e.metadata().map(|m| m.len() <= self.config.max_file_bytes).unwrap_or(false))
            .filter_map(|e| {
                let rel = e.path().strip_prefix(root).ok()?.to_string_lossy().replace('\\', "/");
                (self.include.is_match(&rel) && !self.exclude.is_match(&rel)).then_some(rel)
            })
            .collect();
        files.sort();
        files
    }

    fn tag_file(&self, root: &Path, rel: &str, commit: Option<&str>) -> Arc<Vec<Tag>> {
        let key = commit.map(|c| (c.to_string(), rel.to_string()));
        if let Some(k) = &key {
            if let Some(hit) = self.cache.read().unwrap().get(k) {
                return hit.clone();
            }
        }
        let tags = match std::fs::read(root.join(rel)) {
            Ok(bytes) if !bytes.iter().take(8000).any(|b| *b == 0) => {
                tags::tag_source(rel, &String::from_utf8_lossy(&bytes))
            }
            _ => Vec::new(),
        };
        let tags = Arc::new(tags);
        if let Some(k) = key {
            self.cache.write().unwrap().insert(k, tags.clone());
        }
        tags
    }

    /// Tags for every included, non-binary file under `root`, ordered by (path, line).
    pub fn extract_tags(&self, root: &Path, commit: Option<&str>) -> Result<Vec<Tag>, RepoMapError> {
        self.extractions.fetch_add(1, Ordering::SeqCst);
        let files = self.candidate_files(root);
        let mut all: Vec<Tag> = Vec::new();
        for rel in &files {
            all.extend(self.tag_file(root, rel, commit).iter().cloned());
        }
        if let Extractor::Ctags(program) = &self.config.extractor {
            all.retain(|t| t.kind == TagKind::Ref);
            all.extend(tags::ctags_defs(program, root, &files)?);
        }
        tags::sort_tags(&mut all);
        Ok(all)
    }

    /// Full map for a checkout: tags, graph, ranking, rendering.
    pub fn build_map(
        &self,
        root: &Path,
        commit: Option<&str>,
        focus_files: &[String],
        mentioned: &HashSet<String>,
        budget: usize,
    ) -> Result<MapArtifacts, RepoMapError> {
        let tags = self.extract_tags(root, commit)?;
        let graph = build_graph(&tags);
        if graph.nodes.is_empty() {
            return Ok(MapArtifacts { ranking: None, map: render_map(&[], budget, self.counter.as_ref()) });
        }
        let ranking = rank(&graph, focus_files, mentioned, &self.config.rank)?;
        let map = render_map(&ranking.symbols, budget, self.counter.as_ref());
        Ok(MapArtifacts { ranking: Some(ranking), map })
    }
}

/// A rendered map plus the ranking it came from, so callers can re-render at a
/// smaller budget without re-tagging.
#[derive(Debug, Clone, PartialEq)]
pub struct MapArtifacts {
    pub ranking: Option<Ranking>,
    pub map: RepoMapText,
}

impl MapArtifacts {
    pub fn rerender(&self, budget: usize, counter: &dyn TokenCounter) -> RepoMapText {
        let symbols = self.ranking.as_ref().map(|r| r.symbols.as_slice()).unwrap_or(&[]);
        render_map(symbols, budget, counter)
    }
}

/// Identifiers (3+ chars) appearing in free text, for the mention boost.
pub fn mentioned_idents(text: &str) -> HashSet<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"[A-Za-z_][A-Za-z0-9_]{2,}").unwrap());
    re.find_iter(text).map(|m| m.as_str().to_string()).collect()
}
