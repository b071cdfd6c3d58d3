//! Deterministic layer: staging and advisory plans from an intent, then the
//! calibrated `workflow.json` DAG from provisioning measurements.

mod advisory;
mod calibrate;
mod cost;
mod dag;
mod staging;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::genome::Chromosome;
use crate::intent::{GenomicRegion, ResearchIntent};

pub use advisory::{plan_advisory, AdvisoryPlan};
pub use calibrate::{calibrate_parallelism, CalibrationConfig};
pub use cost::{summarize_for_approval, ApprovalSummary, CostModel};
pub use dag::{
    generate_dag, parse_dag, serialize_dag, DagError, DagMetadata, GeneratorConfig, Measurements,
    Task, TaskType, UnitMeasurement, WorkflowDag,
};
pub use staging::{plan_staging, StagingAction, StagingConfig, StagingPlan};

/// Bumped on any change to the DAG template or serialization.
pub const GENERATOR_VERSION: &str = "intent2dag-generator/1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ComposerError {
    #[error("data_sources has no entry for chromosome {0}")]
    UnknownChromosomeSource(Chromosome),
    #[error("no measurement for unit {0}")]
    MissingMeasurement(String),
    #[error("invalid DAG: {0}")]
    InvalidDag(#[from] DagError),
}

/// One chromosome, or one region on a chromosome: the granularity of staging,
/// measurement and per-unit parallelism.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Unit {
    pub chromosome: Chromosome,
    pub region: Option<GenomicRegion>,
}

impl Unit {
    fn key(&self) -> (Chromosome, u64, u64, String) {
        match &self.region {
            Some(r) => (self.chromosome, r.start, r.end, r.name.clone()),
            None => (self.chromosome, 0, 0, String::new()),
        }
    }

    /// Identifier-safe label such as `chr6-HLA` or `chr21`.
    pub fn label(&self) -> String {
        match &self.region {
            Some(r) => {
                let name: String = r
                    .name
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
                    .collect();
                format!("chr{}-{}", self.chromosome, name)
            }
            None => format!("chr{}", self.chromosome),
        }
    }

    pub fn region_name(&self) -> Option<&str> {
        self.region.as_ref().map(|r| r.name.as_str())
    }
}

impl Ord for Unit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Unit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// One unit per region, plus one per listed chromosome that no region covers.
pub fn units(intent: &ResearchIntent) -> Vec<Unit> {
    let mut out: Vec<Unit> = intent
        .regions
        .iter()
        .flatten()
        .map(|r| Unit {
            chromosome: r.chromosome,
            region: Some(r.clone()),
        })
        .collect();
    for &c in intent.chromosomes.iter().flatten() {
        if !out.iter().any(|u| u.chromosome == c) {
            out.push(Unit {
                chromosome: c,
                region: None,
            });
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Decimal byte count for people: `1.57 GB`, `23.0 MB`.
pub fn human_bytes(bytes: u64) -> String {
    const UNITS: [(&str, f64); 4] = [("TB", 1e12), ("GB", 1e9), ("MB", 1e6), ("kB", 1e3)];
    for (unit, scale) in UNITS {
        if bytes as f64 >= scale {
            return format!("{:.2} {unit}", bytes as f64 / scale);
        }
    }
    format!("{bytes} B")
}
