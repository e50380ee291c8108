//! File-level reference graph built from tags.

use std::collections::{BTreeMap, BTreeSet};

use super::tags::{Tag, TagKind};

/// A definition site carried through ranking into the rendered map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefSite {
    pub path: String,
    pub symbol: String,
    pub line: usize,
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Edge {
    pub weight: f64,
    /// Weight contributed per referenced symbol; sums to `weight`.
    pub by_symbol: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefGraph {
    /// Sorted file paths.
    pub nodes: Vec<String>,
    /// `(referencing, defining)` node indices.
    pub edges: BTreeMap<(usize, usize), Edge>,
    /// Symbol → sorted defining files.
    pub ident_index: BTreeMap<String, Vec<String>>,
    pub defs: Vec<DefSite>,
}

impl RefGraph {
    pub fn node_index(&self, path: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(path)).ok()
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&Edge> {
        self.edges.get(&(self.node_index(from)?, self.node_index(to)?))
    }
}

/// Edge A→B accumulates, per reference in A to a symbol defined in B,
/// `1 / sqrt(number of files defining the symbol)`.
pub fn build_graph(tags: &[Tag]) -> RefGraph {
    let nodes: Vec<String> = tags.iter().map(|t| t.path.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let index = |p: &str| nodes.binary_search_by(|n| n.as_str().cmp(p)).expect("node exists");

    let mut def_files: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut defs = Vec::new();
    for t in tags.iter().filter(|t| t.kind == TagKind::Def) {
        def_files.entry(t.symbol.clone()).or_default().insert(t.path.clone());
        defs.push(DefSite {
            path: t.path.clone(),
            symbol: t.symbol.clone(),
            line: t.line,
            signature: t.signature.clone().unwrap_or_else(|| t.symbol.clone()),
        });
    }
    defs.sort_by(|a, b| (a.path.as_str(), a.line, a.symbol.as_str()).cmp(&(b.path.as_str(), b.line, b.symbol.as_str())));

    let mut edges: BTreeMap<(usize, usize), Edge> = BTreeMap::new();
    for r in tags.iter().filter(|t| t.kind == TagKind::Ref) {
        let Some(definers) = def_files.get(&r.symbol) else { continue };
        let share = 1.0 / (definers.len() as f64).sqrt();
        let src = index(&r.path);
        for d in definers {
            let e = edges.entry((src, index(d))).or_default();
            e.weight += share;
            *e.by_symbol.entry(r.symbol.clone()).or_default() += share;
        }
    }

    let ident_index = def_files.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect();
    RefGraph { nodes, edges, ident_index, defs }
}
