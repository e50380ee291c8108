//! Personalized PageRank over the file graph and per-symbol apportioning.
//!
//! The stationary vector solves `x = (1-d)·p + d·Aᵀx`, where `A` row-normalizes the
//! (boosted) edge weights and dangling files redistribute along `p`. It is computed
//! with symmetric Gauss–Seidel sweeps (forward then backward), which reach the
//! same fixed point as power iteration in far fewer sweeps.

use std::collections::{BTreeMap, HashSet};

use super::graph::RefGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankConfig {
    pub damping: f64,
    /// Multiplier on edges into files that define an identifier mentioned in the issue.
    pub mention_boost: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig { damping: 0.85, mention_boost: 10.0, tolerance: 1e-8, max_iterations: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("no convergence after {iterations} iterations (L1 change {delta:e})")]
    ConvergenceFailure { iterations: usize, delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedSymbol {
    pub path: String,
    pub symbol: String,
    pub line: usize,
    pub signature: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub file_ranks: BTreeMap<String, f64>,
    /// Descending score; ties by path then line.
    pub symbols: Vec<RankedSymbol>,
    pub iterations: usize,
}

/// Personalization vector: uniform over focus files present in the graph, else uniform.
pub fn personalization(graph: &RefGraph, focus_files: &[String]) -> Vec<f64> {
    let n = graph.nodes.len();
    let focus: Vec<usize> = {
        let mut f: Vec<usize> = focus_files.iter().filter_map(|p| graph.node_index(p)).collect();
        f.sort_unstable();
        f.dedup();
        f
    };
    let mut p = vec![0.0; n];
    if focus.is_empty() {
        p.iter_mut().for_each(|v| *v = 1.0 / n as f64);
    } else {
        for i in &focus {
            p[*i] = 1.0 / focus.len() as f64;
        }
    }
    p
}

/// Edge weights after the mention boost, as `(from, to, weight)`.
pub fn boosted_edges(graph: &RefGraph, mentioned: &HashSet<String>, boost: f64) -> Vec<(usize, usize, f64)> {
    let mut boosted_files = vec![false; graph.nodes.len()];
    for ident in mentioned {
        for file in graph.ident_index.get(ident).into_iter().flatten() {
            if let Some(i) = graph.node_index(file) {
                boosted_files[i] = true;
            }
        }
    }
    graph
        .edges
        .iter()
        .map(|(&(a, b), e)| (a, b, if boosted_files[b] { e.weight * boost } else { e.weight }))
        .collect()
}

fn file_ranks(
    n: usize,
    edges: &[(usize, usize, f64)],
    p: &[f64],
    cfg: &RankConfig,
) -> Result<(Vec<f64>, usize), RankError> {
    let d = cfg.damping;
    let mut out_weight = vec![0.0; n];
    for &(a, _, w) in edges {
        out_weight[a] += w;
    }
    // Incoming transition probabilities per node, self-loops kept apart.
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut self_loop = vec![0.0; n];
    for &(a, b, w) in edges {
        let prob = w / out_weight[a];
        if a == b {
            self_loop[b] += prob;
        } else {
            incoming[b].push((a, prob));
        }
    }
    let dangling: Vec<bool> = out_weight.iter().map(|w| *w == 0.0).collect();

    let mut x = p.to_vec();
    let mut dangling_mass: f64 = (0..n).filter(|&i| dangling[i]).map(|i| x[i]).sum();
    let order_fwd: Vec<usize> = (0..n).collect();
    let order_bwd: Vec<usize> = (0..n).rev().collect();

    // Sweep well past the failure threshold when cheap; fail only above it.
    let target = cfg.tolerance * 1e-4;
    let mut delta = f64::INFINITY;
    let mut sweeps = 0;
    for iteration in 1..=cfg.max_iterations {
        sweeps = iteration;
        let before = x.clone();
        for order in [&order_fwd, &order_bwd] {
            for &v in order.iter() {
                let inflow: f64 = incoming[v].iter().map(|&(u, prob)| x[u] * prob).sum();
                let others_dangling = if dangling[v] { dangling_mass - x[v] } else { dangling_mass };
                // Solve the row for x[v], moving its own terms to the left-hand side.
                let own = d * self_loop[v] + if dangling[v] { d * p[v] } else { 0.0 };
                let rhs = (1.0 - d) * p[v] + d * inflow + d * p[v] * others_dangling;
                let new = rhs / (1.0 - own);
                if dangling[v] {
                    dangling_mass += new - x[v];
                }
                x[v] = new;
            }
        }
        delta = x.iter().zip(&before).map(|(a, b)| (a - b).abs()).sum();
        if delta <= target {
            break;
        }
    }
    if delta > cfg.tolerance {
        return Err(RankError::ConvergenceFailure { iterations: cfg.max_iterations, delta });
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    Ok((x, sweeps))
}

/// Rank files and apportion each file's rank to its definitions.
///
/// A file's rank is split over its defined symbols in proportion to the reference
/// weight each symbol receives; a file nobody references splits evenly.
pub fn rank(
    graph: &RefGraph,
    focus_files: &[String],
    mentioned: &HashSet<String>,
    cfg: &RankConfig,
) -> Result<Ranking, RankError> {
    let n = graph.nodes.len();
    if n == 0 {
        return Err(RankError::EmptyGraph);
    }
    let p = personalization(graph, focus_files);
    let edges = boosted_edges(graph, mentioned, cfg.mention_boost);
    let (ranks, iterations) = file_ranks(n, &edges, &p, cfg)?;

    // Unboosted incoming weight per (file, symbol); the boost is per target file so
    // shares within a file are unaffected by it.
    let mut sym_in: BTreeMap<(usize, &str), f64> = BTreeMap::new();
    let mut file_in = vec![0.0; n];
    for (&(_, b), e) in &graph.edges {
        for (s, w) in &e.by_symbol {
            *sym_in.entry((b, s.as_str())).or_default() += w;
            file_in[b] += w;
        }
    }
    let mut defs_per: BTreeMap<(usize, &str), usize> = BTreeMap::new();
    let mut distinct_per_file = vec![0usize; n];
    for def in &graph.defs {
        let i = graph.node_index(&def.path).expect("def file is a node");
        let c = defs_per.entry((i, def.symbol.as_str())).or_default();
        if *c == 0 {
            distinct_per_file[i] += 1;
        }
        *c += 1;
    }

    let mut symbols: Vec<RankedSymbol> = graph
        .defs
        .iter()
        .map(|def| {
            let i = graph.node_index(&def.path).expect("def file is a node");
            let share = if file_in[i] > 0.0 {
                sym_in.get(&(i, def.symbol.as_str())).copied().unwrap_or(0.0) / file_in[i]
            } else {
                1.0 / distinct_per_file[i] as f64
            };
            let score = ranks[i] * share / defs_per[&(i, def.symbol.as_str())] as f64;
            RankedSymbol {
                path: def.path.clone(),
                symbol: def.symbol.clone(),
                line: def.line,
                signature: def.signature.clone(),
                score,
            }
        })
        .collect();
    symbols.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then_with(|| a.path.cmp(&b.path))
            .then_with(|| a.line.cmp(&b.line))
    });

    let file_ranks = graph.nodes.iter().cloned().zip(ranks).collect();
    Ok(Ranking { file_ranks, symbols, iterations })
}
