//! Token-budgeted map text.

use serde::{Deserialize, Serialize};

use super::rank::RankedSymbol;

/// Counts prompt tokens.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// `ceil(bytes / 4)`, used when no exact tokenizer is configured.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteEstimate;

impl TokenCounter for ByteEstimate {
    fn count(&self, text: &str) -> usize {
        text.len().div_ceil(4)
    }
}

pub fn estimate_tokens(text: &str) -> usize {
    ByteEstimate.count(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolRef {
    pub path: String,
    pub symbol: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoMapText {
    pub text: String,
    pub token_estimate: usize,
    pub included_symbols: Vec<SymbolRef>,
    pub budget: usize,
}

fn block(sym: &RankedSymbol) -> String {
    format!("{}:\n  {}\n", sym.path, sym.signature)
}

/// Append blocks in rank order while the estimate stays within `budget`.
/// The top block is always included.
pub fn render_map(ranked: &[RankedSymbol], budget_tokens: usize, counter: &dyn TokenCounter) -> RepoMapText {
    let mut text = String::new();
    let mut included = Vec::new();
    for sym in ranked {
        let candidate = format!("{text}{}", block(sym));
        if !included.is_empty() && counter.count(&candidate) > budget_tokens {
            break;
        }
        text = candidate;
        included.push(SymbolRef { path: sym.path.clone(), symbol: sym.symbol.clone(), line: sym.line });
    }
    RepoMapText { token_estimate: counter.count(&text), text, included_symbols: included, budget: budget_tokens }
}
