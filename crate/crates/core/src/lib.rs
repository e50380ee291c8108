//! Automatic labeling of SWE-bench-style code-repair instances.
//!
//! The crate covers the whole batch pipeline: dataset and workspace handling,
//! model backends, issue cleaning, repository maps, the clarity / coverage /
//! difficulty pipelines, multi-run consensus, agreement statistics, evaluation
//! procedures and cost projection.

pub mod costkit;
pub mod dataset;
pub mod agreement;
pub mod consensus;
pub mod diff;
pub mod evalkit;
pub mod gateway;
pub mod ica;
pub mod output;
pub mod pipeline;
pub mod preprocess;
pub mod prompts;
pub mod repomap;
pub mod tca;
pub mod types;
pub mod workspace;

pub use types::*;
