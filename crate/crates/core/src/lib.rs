//! Reference-free evaluation workbench for long-form question answering.
//!
//! The pipeline runs in stages: heterogeneous preference corpora are ingested
//! into unified records ([`ingest`]), prompts are classified as long-form
//! questions ([`filter`]), answers are scored on nine quality rubrics
//! ([`rubric`]), an interpretable linear model predicts pairwise human
//! preference ([`preference`]), LLM judges are benchmarked against the human
//! labels ([`judge`]), and judge reliability is audited for transitivity,
//! position bias, verbosity bias, and perturbation robustness ([`audit`]).
//! All model traffic flows through one cached, provider-agnostic [`gateway`].

pub mod audit;
pub mod error;
pub mod filter;
pub mod gateway;
pub mod ingest;
pub mod jsonl;
pub mod judge;
pub mod preference;
pub mod prompts;
pub mod report;
pub mod rubric;
pub mod types;

pub use error::{Error, Result};
