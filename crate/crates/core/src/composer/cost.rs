use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{StagingPlan, Task, TaskType, WorkflowDag};

/// Simulated task cost: `fixed_s + rows * per_row_s`, per task type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub fixed_s: f64,
    pub individuals_per_row_s: f64,
    pub merge_per_row_s: f64,
    pub sifting_per_row_s: f64,
    pub analysis_per_row_s: f64,
    pub storage_multiplier: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            fixed_s: 2.0,
            individuals_per_row_s: 0.002,
            merge_per_row_s: 0.0002,
            sifting_per_row_s: 0.0001,
            analysis_per_row_s: 0.0005,
            storage_multiplier: 3,
        }
    }
}

impl CostModel {
    pub fn duration_s(&self, task: &Task) -> f64 {
        let per_row = match task.task_type {
            TaskType::Individuals => self.individuals_per_row_s,
            TaskType::IndividualsMerge => self.merge_per_row_s,
            TaskType::Sifting => self.sifting_per_row_s,
            TaskType::MutationOverlap | TaskType::Frequency => self.analysis_per_row_s,
        };
        self.fixed_s + task.rows as f64 * per_row
    }

    /// Total work spread over the vCPUs, plus one fixed latency per stage.
    pub fn projected_runtime_s(&self, dag: &WorkflowDag, vcpus: u32) -> f64 {
        const STAGES: f64 = 3.0;
        let work: f64 = dag.tasks.iter().map(|t| self.duration_s(t)).sum();
        work / vcpus.max(1) as f64 + STAGES * self.fixed_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprovalSummary {
    pub task_count: usize,
    pub tasks_by_type: BTreeMap<String, usize>,
    pub parallelism: BTreeMap<String, u32>,
    pub est_peak_storage_bytes: u64,
    pub projected_runtime_s: f64,
    pub total_vcpus: u32,
}

pub fn summarize_for_approval(dag: &WorkflowDag, staging: &StagingPlan, cost: &CostModel) -> ApprovalSummary {
    ApprovalSummary {
        task_count: dag.tasks.len(),
        tasks_by_type: TaskType::ALL
            .iter()
            .map(|t| (t.as_str().to_string(), dag.count(*t)))
            .collect(),
        parallelism: dag.metadata.parallelism.clone(),
        est_peak_storage_bytes: staging.total_est_bytes * cost.storage_multiplier,
        projected_runtime_s: cost.projected_runtime_s(dag, dag.metadata.total_vcpus),
        total_vcpus: dag.metadata.total_vcpus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composer::{generate_dag, GeneratorConfig, Measurements, UnitMeasurement};
    use crate::genome::Chromosome;
    use crate::intent::{AnalysisType, Focus, GenomicRegion, ResearchIntent};
    use chrono::Utc;
    use proptest::prelude::*;

    fn dag(rows: u64) -> WorkflowDag {
        let intent = ResearchIntent {
            analysis_type: AnalysisType::SinglePopulation,
            populations: vec!["EUR".into()],
            chromosomes: None,
            regions: Some(vec![GenomicRegion {
                name: "HLA".into(),
                chromosome: Chromosome::parse("6").unwrap(),
                start: 28477797,
                end: 33448354,
            }]),
            focus: Focus::AllVariants,
        };
        let m = Measurements {
            per_unit: vec![UnitMeasurement {
                chromosome: Chromosome::parse("6").unwrap(),
                region: Some("HLA".into()),
                rows,
                bytes: 0,
            }],
            total_vcpus: 48,
            measured_at: Utc::now(),
        };
        generate_dag(&intent, "fp", &m, &GeneratorConfig::default()).unwrap()
    }

    #[test]
    fn storage_is_multiplied() {
        let staging = StagingPlan {
            actions: Vec::new(),
            total_est_bytes: 45_000_000,
            total_full_bytes: 100_000_000,
            savings_fraction: 0.55,
            degraded: false,
        };
        let d = dag(10);
        let s = summarize_for_approval(&d, &staging, &CostModel::default());
        assert_eq!(s.est_peak_storage_bytes, 135_000_000);
        assert_eq!(s.task_count, d.tasks.len());
    }

    proptest! {
        #[test]
        fn runtime_monotone_in_rows(a in 0u64..400_000, b in 0u64..400_000) {
            let cost = CostModel::default();
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(cost.projected_runtime_s(&dag(lo), 48) <= cost.projected_runtime_s(&dag(hi), 48));
        }
    }
}
