//! Preference-optimization tooling for generated smart contracts: metrics,
//! mutual code/test ranking, preference-pair construction, and an extended
//! DPO loss with gas and security rewards.
//!
//! The crate is organized as a library first. Each major capability has a
//! runnable example; start there rather than with the module docs:
//!
//! - `cargo run --example task_metrics` — the unbiased Task@k family
//!   (Pass@k, Compile@k, Gas@k, Secure@k) from raw eval records.
//! - `cargo run --example mutual_ranking` — bipartite power iteration where
//!   candidate programs and candidate tests validate each other.
//! - `cargo run --example preference_pairs` — seed partitioning and
//!   per-objective pair construction with reproducible subsampling.
//! - `cargo run --example loss_breakdown` — the DPO term plus gas and
//!   security rewards, decomposed per pair.
//! - `cargo run --example gradient_check` — analytic gradient of the loss
//!   on a toy softmax policy, verified by central differences.
//! - `cargo run --example mock_evaluation` — the hermetic rule-table
//!   backend that stands in for compiler, tests, gas meter, and analyzer.
//! - `cargo run --example data_validation` — schema and cross-reference
//!   checks, and mechanical repair of the implication chain.
//! - `cargo run --example full_pipeline` — every stage chained through the
//!   [`pipeline::Pipeline`] API with manifest-based caching.
//!
//! The same functionality is scriptable through the `prefopt` binary; see
//! the README for the subcommand walkthrough.

pub mod cli;
pub mod config;
pub mod digest;
pub mod fsutil;
pub mod harness;
pub mod jsonl;
pub mod loss;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod pairs;
pub mod pipeline;
pub mod policy;
pub mod ranker;
pub mod report;
