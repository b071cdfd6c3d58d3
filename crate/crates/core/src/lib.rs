//! Natural-language research queries to reproducible 1000 Genomes workflow DAGs.
//!
//! The crate is layered the same way the pipeline is:
//!
//! - [`skills`]: expert-authored markdown knowledge, selectable as S0..S3.
//! - [`extraction`]: query text to [`intent::ResearchIntent`] (rule-based or LLM).
//! - [`composer`]: deterministic staging plans and workflow DAGs.
//! - [`deploy_sim`], [`sentinel`]: simulated provisioning and execution monitoring.
//! - [`conductor`]: the session state machine with its approval gates.
//! - [`evalharness`]: tiered dataset scoring and skill ablation reports.

pub mod api;
pub mod assets;
pub mod composer;
pub mod conductor;
pub mod config;
pub mod deploy_sim;
pub mod evalharness;
pub mod extraction;
pub mod genome;
pub mod intent;
pub mod sentinel;
pub mod skills;

pub use genome::Chromosome;
