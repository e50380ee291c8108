//! `swelabel cost` and `swelabel repomap`.

use std::collections::HashSet;

use anyhow::{anyhow, Context};
use swelabel_core::costkit::{build_cost_table, PricingTable};
use swelabel_core::dataset::read_lines;
use swelabel_core::gateway::{usage_summary, UsageRecord};
use swelabel_core::repomap::{mentioned_idents, Extractor, MapConfig, RepoMapper};

use crate::{config_err, data_err, CliResult, CostArgs, RepomapArgs};

pub fn cost(args: CostArgs) -> CliResult {
    let pricing = PricingTable::load(&args.pricing).map_err(config_err)?;
    let log: Vec<UsageRecord> = match &args.usage {
        Some(p) => read_lines(p).with_context(|| format!("usage log {}", p.display())).map_err(data_err)?,
        None => Vec::new(),
    };
    let (input, output) = match (args.input_median, args.output_median) {
        (Some(i), Some(o)) => (i, o),
        (i, o) => {
            if args.usage.is_none() {
                return Err(config_err(anyhow!("give --usage or both --input-median and --output-median")));
            }
            let summary = usage_summary(&log, args.task.map(Into::into)).map_err(data_err)?;
            (i.unwrap_or(summary.input_tokens), o.unwrap_or(summary.output_tokens))
        }
    };
    let models = if !args.models.is_empty() {
        args.models.clone()
    } else if !log.is_empty() {
        let mut seen = HashSet::new();
        log.iter().filter(|r| seen.insert(r.model_id.clone())).map(|r| r.model_id.clone()).collect()
    } else {
        pricing.model_ids()
    };
    let table = build_cost_table(input, output, &pricing, &models, args.n).map_err(config_err)?;
    print!("{}", table.render());
    Ok(())
}

pub fn repomap(args: RepomapArgs) -> CliResult {
    if !args.repo.is_dir() {
        return Err(data_err(anyhow!("{} is not a directory", args.repo.display())));
    }
    let extractor = args.ctags.clone().map(Extractor::Ctags).unwrap_or(Extractor::Builtin);
    let mapper = RepoMapper::new(MapConfig { extractor, ..MapConfig::default() }).map_err(config_err)?;
    let mentioned = args.mention.as_deref().map(mentioned_idents).unwrap_or_default();
    let artifacts = mapper.build_map(&args.repo, None, &args.focus, &mentioned, args.budget).map_err(data_err)?;
    print!("{}", artifacts.map.text);
    eprintln!(
        "~{} tokens, {} symbols, budget {}",
        artifacts.map.token_estimate,
        artifacts.map.included_symbols.len(),
        artifacts.map.budget
    );
    Ok(())
}
