//! Labeling cost projection from median token usage and per-model rates.

use std::path::Path;

use serde::{Deserialize, Serialize};

const TABLE2: &str = include_str!("../assets/pricing/table2.toml");

#[derive(Debug, thiserror::Error)]
pub enum CostError {
    #[error("no pricing rate for model `{0}`")]
    MissingRate(String),
    #[error("pricing file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("reading pricing file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("negative rate for `{0}`")]
    NegativeRate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingRate {
    pub model_id: String,
    /// Display name; defaults to the model id.
    #[serde(default)]
    pub label: Option<String>,
    /// Currency per 1M input tokens.
    pub input_rate: f64,
    /// Currency per 1M output tokens.
    pub output_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingTable {
    pub profile: String,
    #[serde(default = "usd")]
    pub currency: String,
    #[serde(rename = "rate")]
    pub rates: Vec<PricingRate>,
}

fn usd() -> String {
    "USD".to_string()
}

impl PricingTable {
    pub fn from_toml(text: &str) -> Result<Self, CostError> {
        let table: PricingTable = toml::from_str(text)?;
        if let Some(r) = table.rates.iter().find(|r| r.input_rate < 0.0 || r.output_rate < 0.0) {
            return Err(CostError::NegativeRate(r.model_id.clone()));
        }
        Ok(table)
    }

    /// Built-in profile by name (`table2`), else a TOML file path.
    pub fn load(name_or_path: &str) -> Result<Self, CostError> {
        if name_or_path == "table2" {
            return Self::from_toml(TABLE2);
        }
        let text = std::fs::read_to_string(Path::new(name_or_path))
            .map_err(|source| CostError::Io { path: name_or_path.to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn rate(&self, model_id: &str) -> Result<&PricingRate, CostError> {
        self.rates.iter().find(|r| r.model_id == model_id).ok_or_else(|| CostError::MissingRate(model_id.to_string()))
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.rates.iter().map(|r| r.model_id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub model_id: String,
    pub label: String,
    pub input_cost: f64,
    pub output_cost: f64,
    /// `input_cost + output_cost`, unrounded.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub n_instances: u64,
    pub input_tokens: f64,
    pub output_tokens: f64,
    pub currency: String,
    pub rows: Vec<CostRow>,
}

/// Cost of `n_instances` instances at the given per-instance token counts.
pub fn project_cost(input_tokens: f64, output_tokens: f64, rate: &PricingRate, n_instances: u64) -> CostRow {
    let n = n_instances as f64;
    let input_cost = n * input_tokens * rate.input_rate / 1e6;
    let output_cost = n * output_tokens * rate.output_rate / 1e6;
    CostRow {
        model_id: rate.model_id.clone(),
        label: rate.label.clone().unwrap_or_else(|| rate.model_id.clone()),
        input_cost,
        output_cost,
        total: input_cost + output_cost,
    }
}

/// Half-up rounding to cents. The nudge absorbs binary representation error, so
/// 2.585 displays as 2.59.
pub fn round_cents(x: f64) -> f64 {
    (x * 100.0 + 1e-7).round() / 100.0
}

pub fn build_cost_table(
    input_tokens: f64,
    output_tokens: f64,
    pricing: &PricingTable,
    models: &[String],
    n_instances: u64,
) -> Result<CostTable, CostError> {
    let rows = models
        .iter()
        .map(|m| pricing.rate(m).map(|r| project_cost(input_tokens, output_tokens, r, n_instances)))
        .collect::<Result<_, _>>()?;
    Ok(CostTable { n_instances, input_tokens, output_tokens, currency: pricing.currency.clone(), rows })
}

/// Sum of already-reported cent amounts, e.g. per-task costs into one figure.
pub fn headline(parts: &[f64]) -> f64 {
    round_cents(parts.iter().map(|p| round_cents(*p)).sum())
}

impl CostTable {
    /// Plain-text table: model, input cost, output cost, total, in cents.
    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        let mut out = format!(
            "Cost for {} instances ({} input / {} output tokens per instance, {})\n",
            self.n_instances, self.input_tokens, self.output_tokens, self.currency
        );
        out.push_str(&format!("{:<width$}  {:>10}  {:>10}  {:>10}\n", "Model", "In. Cost", "Out. Cost", "Total"));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<width$}  {:>10.2}  {:>10.2}  {:>10.2}\n",
                r.label,
                round_cents(r.input_cost),
                round_cents(r.output_cost),
                round_cents(r.total)
            ));
        }
        out
    }
}
