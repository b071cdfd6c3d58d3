//! Simulated deployment: stages data against a fixture dataset and reports
//! the measurements that drive deferred DAG generation.

use std::collections::BTreeMap;
use std::process::Command;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::composer::{Measurements, StagingAction, StagingPlan, UnitMeasurement};
use crate::genome::Chromosome;
use crate::skills::{div_round_half_up, Extraction, RowRatio};

pub const ENV_STAGING_HOOK: &str = "I2D_STAGING_HOOK";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeployError {
    #[error("fixture has no chromosome {0}")]
    UnknownChromosome(Chromosome),
    #[error("region {region} extends past the end of chromosome {chromosome}")]
    RegionOutsideFixture { region: String, chromosome: Chromosome },
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
    #[error("staging hook exited with {code:?}: {stderr}")]
    HookFailed { code: Option<i32>, stderr: String },
    #[error("staging hook output lacks `rows=<n> bytes=<n>`: {0}")]
    HookOutputUnparseable(String),
    #[error("no staging hook configured (set {ENV_STAGING_HOOK})")]
    HookNotConfigured,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureChromosome {
    pub length: u64,
    pub full_size_bytes: u64,
    pub total_rows: u64,
    /// `(start, end, rows)`, 1-based inclusive, sorted and non-overlapping.
    pub bins: Vec<(u64, u64, u64)>,
    #[serde(default)]
    pub notes: String,
}

impl FixtureChromosome {
    fn ratio(&self) -> RowRatio {
        RowRatio {
            bytes: self.full_size_bytes,
            rows: self.total_rows,
        }
    }

    /// Rows overlapping `[start, end]`; partial bins pro-rated by span, rounded half up.
    pub fn rows_in(&self, start: u64, end: u64) -> u64 {
        self.bins
            .iter()
            .map(|&(bs, be, rows)| {
                let lo = start.max(bs);
                let hi = end.min(be);
                if hi < lo {
                    0
                } else {
                    div_round_half_up(rows as u128 * (hi - lo + 1) as u128, (be - bs + 1) as u128)
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureDataset {
    pub format: String,
    pub version: u32,
    pub build: String,
    #[serde(default)]
    pub description: String,
    pub chromosomes: BTreeMap<String, FixtureChromosome>,
}

impl FixtureDataset {
    pub fn parse(json: &str) -> Result<Self, DeployError> {
        let fx: FixtureDataset =
            serde_json::from_str(json).map_err(|e| DeployError::InvalidFixture(e.to_string()))?;
        if fx.format != "intent2dag-fixture" || fx.version != 1 {
            return Err(DeployError::InvalidFixture(format!("unsupported format {} v{}", fx.format, fx.version)));
        }
        for (label, c) in &fx.chromosomes {
            let bad = |m: &str| DeployError::InvalidFixture(format!("chromosome {label}: {m}"));
            Chromosome::parse(label).ok_or_else(|| bad("unknown label"))?;
            if c.full_size_bytes == 0 || c.total_rows == 0 {
                return Err(bad("sizes must be positive"));
            }
            if c.bins.iter().map(|b| b.2).sum::<u64>() != c.total_rows {
                return Err(bad("bin rows do not sum to total_rows"));
            }
            let mut prev_end = 0;
            for &(s, e, _) in &c.bins {
                if s <= prev_end || e < s || e > c.length {
                    return Err(bad("bins must be sorted, non-overlapping and within the chromosome"));
                }
                prev_end = e;
            }
        }
        Ok(fx)
    }

    pub fn bundled() -> Self {
        Self::parse(crate::assets::FIXTURE_JSON).expect("bundled fixture is valid")
    }

    pub fn chromosome(&self, c: Chromosome) -> Option<&FixtureChromosome> {
        self.chromosomes.get(c.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeployConfig {
    pub vcpus: u32,
    pub bandwidth_bytes_per_s: f64,
    pub namespace_overhead_s: f64,
}

impl Default for DeployConfig {
    fn default() -> Self {
        DeployConfig {
            vcpus: 48,
            bandwidth_bytes_per_s: 100e6,
            namespace_overhead_s: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedAction {
    pub action: StagingAction,
    pub actual_bytes: u64,
    pub rows: u64,
}

impl StagedAction {
    /// Fraction of the full file that did not need transferring.
    pub fn saved_fraction(&self) -> f64 {
        1.0 - self.actual_bytes as f64 / self.action.full_bytes.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisionResult {
    pub namespace: String,
    pub staged: Vec<StagedAction>,
    pub measurements: Measurements,
    pub elapsed_sim_s: f64,
}

/// Kubernetes-style namespace name derived from the session id.
pub fn namespace_for(session_id: &str) -> String {
    let digest = hex::encode(Sha256::digest(session_id.as_bytes()));
    format!("i2d-{}", &digest[..12])
}

fn assemble(
    session_id: &str,
    staged: Vec<StagedAction>,
    vcpus: u32,
    measured_at: DateTime<Utc>,
    config: &DeployConfig,
) -> ProvisionResult {
    let bytes: u64 = staged.iter().map(|s| s.actual_bytes).sum();
    let per_unit = staged
        .iter()
        .map(|s| UnitMeasurement {
            chromosome: s.action.chromosome,
            region: s.action.region.as_ref().map(|r| r.name.clone()),
            rows: s.rows,
            bytes: s.actual_bytes,
        })
        .collect();
    ProvisionResult {
        namespace: namespace_for(session_id),
        staged,
        measurements: Measurements {
            per_unit,
            total_vcpus: vcpus,
            measured_at,
        },
        elapsed_sim_s: bytes as f64 / config.bandwidth_bytes_per_s + config.namespace_overhead_s,
    }
}

/// Executes every staging action against the fixtures.
pub fn provision(
    session_id: &str,
    staging: &StagingPlan,
    fixtures: &FixtureDataset,
    vcpus: u32,
    measured_at: DateTime<Utc>,
    config: &DeployConfig,
) -> Result<ProvisionResult, DeployError> {
    let mut staged = Vec::new();
    for action in &staging.actions {
        let fx = fixtures
            .chromosome(action.chromosome)
            .ok_or(DeployError::UnknownChromosome(action.chromosome))?;
        let (rows, actual_bytes) = match (&action.region, action.kind) {
            (Some(region), Extraction::RegionExtract) => {
                if region.end > fx.length {
                    return Err(DeployError::RegionOutsideFixture {
                        region: region.name.clone(),
                        chromosome: action.chromosome,
                    });
                }
                let rows = fx.rows_in(region.start, region.end);
                (rows, fx.ratio().bytes_for_rows(rows))
            }
            _ => (fx.total_rows, fx.full_size_bytes),
        };
        staged.push(StagedAction {
            action: action.clone(),
            actual_bytes,
            rows,
        });
    }
    Ok(assemble(session_id, staged, vcpus, measured_at, config))
}

fn parse_hook_output(stdout: &str) -> Option<(u64, u64)> {
    let mut rows = None;
    let mut bytes = None;
    for token in stdout.split_whitespace() {
        if let Some(v) = token.strip_prefix("rows=") {
            rows = v.parse().ok();
        } else if let Some(v) = token.strip_prefix("bytes=") {
            bytes = v.parse().ok();
        }
    }
    Some((rows?, bytes?))
}

/// Delegates each action to `hook`, a shell command receiving
/// `chromosome start end url` and printing `rows=<n> bytes=<n>`.
pub fn provision_external(
    session_id: &str,
    staging: &StagingPlan,
    hook: Option<&str>,
    vcpus: u32,
    measured_at: DateTime<Utc>,
    config: &DeployConfig,
) -> Result<ProvisionResult, DeployError> {
    let hook = hook.filter(|h| !h.trim().is_empty()).ok_or(DeployError::HookNotConfigured)?;
    let mut staged = Vec::new();
    for action in &staging.actions {
        let (start, end) = match &action.region {
            Some(r) => (r.start, r.end),
            None => (1, action.chromosome.grch37_length()),
        };
        let output = Command::new("sh")
            .arg("-c")
            .arg(format!("{hook} \"$@\""))
            .arg("i2d-staging-hook")
            .arg(action.chromosome.label())
            .arg(start.to_string())
            .arg(end.to_string())
            .arg(&action.source_url)
            .output()
            .map_err(|e| DeployError::HookFailed {
                code: None,
                stderr: e.to_string(),
            })?;
        if !output.status.success() {
            return Err(DeployError::HookFailed {
                code: output.status.code(),
                stderr: String::from_utf8_lossy(&output.stderr).chars().take(200).collect(),
            });
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let (rows, actual_bytes) =
            parse_hook_output(&stdout).ok_or_else(|| DeployError::HookOutputUnparseable(stdout.trim().to_string()))?;
        staged.push(StagedAction {
            action: action.clone(),
            actual_bytes,
            rows,
        });
    }
    Ok(assemble(session_id, staged, vcpus, measured_at, config))
}
