use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub rows_per_task_target: u64,
    pub max_parallelism: u32,
    /// Ceiling for estimate-based (advisory) parallelism.
    pub advisory_cap: u32,
    /// Also cap J at the cluster's vCPU count.
    pub cap_to_vcpus: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            rows_per_task_target: 3257,
            max_parallelism: 64,
            advisory_cap: 100,
            cap_to_vcpus: false,
        }
    }
}

fn ceil_div(rows: u64, target: u64) -> u64 {
    rows.div_ceil(target.max(1))
}

/// `clamp(ceil(rows / target), 1, cap)`.
pub fn calibrate_parallelism(rows: u64, total_vcpus: u32, config: &CalibrationConfig) -> u32 {
    let mut cap = config.max_parallelism.max(1);
    if config.cap_to_vcpus {
        cap = cap.min(total_vcpus.max(1));
    }
    ceil_div(rows, config.rows_per_task_target).clamp(1, cap as u64) as u32
}

pub(crate) fn advisory_parallelism(est_rows: u64, config: &CalibrationConfig) -> u32 {
    ceil_div(est_rows, config.rows_per_task_target).clamp(1, config.advisory_cap.max(1) as u64) as u32
}
