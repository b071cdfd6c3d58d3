use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{calibrate_parallelism, units, CalibrationConfig, ComposerError, Unit, GENERATOR_VERSION};
use crate::genome::Chromosome;
use crate::intent::{canonicalize, intent_hash, ResearchIntent};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitMeasurement {
    pub chromosome: Chromosome,
    pub region: Option<String>,
    pub rows: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurements {
    pub per_unit: Vec<UnitMeasurement>,
    pub total_vcpus: u32,
    pub measured_at: DateTime<Utc>,
}

impl Measurements {
    /// Measurement for `unit`, falling back to the chromosome's full-file entry.
    pub fn for_unit(&self, unit: &Unit) -> Option<&UnitMeasurement> {
        let name = unit.region_name();
        self.per_unit
            .iter()
            .find(|m| m.chromosome == unit.chromosome && m.region.as_deref() == name)
            .or_else(|| {
                self.per_unit
                    .iter()
                    .find(|m| m.chromosome == unit.chromosome && m.region.is_none())
            })
    }

    /// SHA-256 over the sorted per-unit entries and vCPU count; `measured_at` is excluded.
    pub fn digest(&self) -> String {
        let mut entries = self.per_unit.clone();
        entries.sort_by(|a, b| (a.chromosome, &a.region).cmp(&(b.chromosome, &b.region)));
        let body = serde_json::json!({"per_unit": entries, "total_vcpus": self.total_vcpus});
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub calibration: CalibrationConfig,
    /// Millicores requested by every task.
    pub cpu_request: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            calibration: CalibrationConfig::default(),
            cpu_request: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Individuals,
    IndividualsMerge,
    Sifting,
    MutationOverlap,
    Frequency,
}

impl TaskType {
    pub const ALL: [TaskType; 5] = [
        TaskType::Individuals,
        TaskType::IndividualsMerge,
        TaskType::Sifting,
        TaskType::MutationOverlap,
        TaskType::Frequency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Individuals => "individuals",
            TaskType::IndividualsMerge => "individuals_merge",
            TaskType::Sifting => "sifting",
            TaskType::MutationOverlap => "mutation_overlap",
            TaskType::Frequency => "frequency",
        }
    }
}

/// Field order here is the serialized key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    pub unit: String,
    pub chromosome: Chromosome,
    pub region: Option<String>,
    pub population: Option<String>,
    /// Variant rows this task processes; drives the simulated cost.
    pub rows: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub cpu_request: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagMetadata {
    pub intent_hash: String,
    pub skill_fingerprint: String,
    pub measurements_digest: String,
    pub generator_version: String,
    /// Final J per unit label.
    pub parallelism: BTreeMap<String, u32>,
    pub total_vcpus: u32,
    pub measured_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowDag {
    pub name: String,
    pub version: String,
    pub metadata: DagMetadata,
    pub tasks: Vec<Task>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DagError {
    #[error("duplicate task id `{0}`")]
    DuplicateTaskId(String),
    #[error("edge endpoint `{0}` is not a task")]
    DanglingEdge(String),
    #[error("cycle through `{0}`")]
    Cycle(String),
    #[error("malformed workflow.json: {0}")]
    Malformed(String),
}

impl WorkflowDag {
    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn count(&self, task_type: TaskType) -> usize {
        self.tasks.iter().filter(|t| t.task_type == task_type).count()
    }

    /// Direct predecessors of every task.
    pub fn dependencies(&self) -> HashMap<&str, Vec<&str>> {
        let mut deps: HashMap<&str, Vec<&str>> = self.tasks.iter().map(|t| (t.id.as_str(), Vec::new())).collect();
        for (from, to) in &self.edges {
            deps.entry(to.as_str()).or_default().push(from.as_str());
        }
        deps
    }

    /// Unique ids, edges between existing tasks, no cycles.
    pub fn check(&self) -> Result<(), DagError> {
        let mut ids = HashSet::new();
        for t in &self.tasks {
            if !ids.insert(t.id.as_str()) {
                return Err(DagError::DuplicateTaskId(t.id.clone()));
            }
        }
        for (a, b) in &self.edges {
            for end in [a, b] {
                if !ids.contains(end.as_str()) {
                    return Err(DagError::DanglingEdge(end.clone()));
                }
            }
        }
        // Kahn's algorithm
        let mut indegree: HashMap<&str, usize> = ids.iter().map(|id| (*id, 0)).collect();
        let mut out: HashMap<&str, Vec<&str>> = HashMap::new();
        for (a, b) in &self.edges {
            *indegree.get_mut(b.as_str()).expect("checked") += 1;
            out.entry(a.as_str()).or_default().push(b.as_str());
        }
        let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(id, _)| *id).collect();
        let mut visited = 0;
        while let Some(id) = ready.pop() {
            visited += 1;
            for next in out.get(id).into_iter().flatten() {
                let d = indegree.get_mut(next).expect("checked");
                *d -= 1;
                if *d == 0 {
                    ready.push(next);
                }
            }
        }
        if visited != ids.len() {
            let stuck = indegree.iter().filter(|(_, d)| **d > 0).map(|(id, _)| *id).min().unwrap_or_default();
            return Err(DagError::Cycle(stuck.to_string()));
        }
        Ok(())
    }

    /// Units whose measurement reported zero rows.
    pub fn zero_row_units(&self) -> Vec<String> {
        let mut units: Vec<String> = self
            .tasks
            .iter()
            .filter(|t| t.task_type == TaskType::IndividualsMerge && t.rows == 0)
            .map(|t| t.unit.clone())
            .collect();
        units.sort();
        units
    }
}

fn task(id: String, task_type: TaskType, unit: &Unit, population: Option<&str>, rows: u64, cpu: u32) -> Task {
    Task {
        id,
        task_type,
        unit: unit.label(),
        chromosome: unit.chromosome,
        region: unit.region_name().map(str::to_string),
        population: population.map(str::to_string),
        rows,
        inputs: Vec::new(),
        outputs: Vec::new(),
        cpu_request: cpu,
    }
}

/// Builds the calibrated DAG. Output depends only on the canonical intent,
/// the measurements, the config, the fingerprint and the generator version.
pub fn generate_dag(
    intent: &ResearchIntent,
    skill_fingerprint: &str,
    measurements: &Measurements,
    config: &GeneratorConfig,
) -> Result<WorkflowDag, ComposerError> {
    let intent = canonicalize(intent);
    let mut tasks = Vec::new();
    let mut edges = Vec::new();
    let mut parallelism = BTreeMap::new();
    let cpu = config.cpu_request;

    for unit in units(&intent) {
        let label = unit.label();
        let m = measurements
            .for_unit(&unit)
            .ok_or_else(|| ComposerError::MissingMeasurement(label.clone()))?;
        let j = calibrate_parallelism(m.rows, measurements.total_vcpus, &config.calibration);
        parallelism.insert(label.clone(), j);
        let vcf = format!("{label}.vcf.gz");

        let merge_id = format!("individuals_merge-{label}");
        let merged = format!("{label}.individuals.merged.tar.gz");
        let mut merge = task(merge_id.clone(), TaskType::IndividualsMerge, &unit, None, m.rows, cpu);
        for k in 0..j as u64 {
            let id = format!("individuals-{label}-{:03}", k + 1);
            // rows split as evenly as possible, remainder to the first chunks
            let rows = m.rows / j as u64 + u64::from(k < m.rows % j as u64);
            let out = format!("{label}.individuals-{:03}.tar.gz", k + 1);
            let mut t = task(id.clone(), TaskType::Individuals, &unit, None, rows, cpu);
            t.inputs = vec![vcf.clone()];
            t.outputs = vec![out.clone()];
            merge.inputs.push(out);
            edges.push((id, merge_id.clone()));
            tasks.push(t);
        }
        merge.outputs = vec![merged.clone()];
        tasks.push(merge);

        let sifting_id = format!("sifting-{label}");
        let sifted = format!("{label}.sifted.txt");
        let mut sifting = task(sifting_id.clone(), TaskType::Sifting, &unit, None, m.rows, cpu);
        sifting.inputs = vec![vcf.clone()];
        sifting.outputs = vec![sifted.clone()];
        tasks.push(sifting);

        for pop in &intent.populations {
            for (tt, suffix) in [
                (TaskType::MutationOverlap, "mutation_overlap.tar.gz"),
                (TaskType::Frequency, "frequency.tar.gz"),
            ] {
                let id = format!("{}-{label}-{pop}", tt.as_str());
                let mut t = task(id.clone(), tt, &unit, Some(pop), m.rows, cpu);
                t.inputs = vec![merged.clone(), sifted.clone(), format!("{pop}.panel")];
                t.outputs = vec![format!("{label}.{pop}.{suffix}")];
                edges.push((merge_id.clone(), id.clone()));
                edges.push((sifting_id.clone(), id));
                tasks.push(t);
            }
        }
    }

    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    edges.sort();
    edges.dedup();
    let hash = intent_hash(&intent);
    let dag = WorkflowDag {
        name: format!("1000genome-{}", &hash[..12]),
        version: "1.0".into(),
        metadata: DagMetadata {
            intent_hash: hash,
            skill_fingerprint: skill_fingerprint.to_string(),
            measurements_digest: measurements.digest(),
            generator_version: GENERATOR_VERSION.into(),
            parallelism,
            total_vcpus: measurements.total_vcpus,
            measured_at: measurements.measured_at.to_rfc3339_opts(SecondsFormat::Secs, true),
        },
        tasks,
        edges,
    };
    dag.check()?;
    Ok(dag)
}

/// Canonical `workflow.json` bytes: compact, schema key order, sorted tasks
/// and edges, one trailing newline.
pub fn serialize_dag(dag: &WorkflowDag) -> Vec<u8> {
    let mut sorted = dag.clone();
    sorted.tasks.sort_by(|a, b| a.id.cmp(&b.id));
    sorted.edges.sort();
    let mut bytes = serde_json::to_vec(&sorted).expect("dag serializes");
    bytes.push(b'\n');
    bytes
}

pub fn parse_dag(bytes: &[u8]) -> Result<WorkflowDag, DagError> {
    let dag: WorkflowDag = serde_json::from_slice(bytes).map_err(|e| DagError::Malformed(e.to_string()))?;
    dag.check()?;
    Ok(dag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::intent::{AnalysisType, Focus};
    use crate::skills::{select_skillset, SkillConfig};
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn at(secs: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_760_000_000 + secs, 0).unwrap()
    }

    fn hbb_intent(pops: &[&str]) -> ResearchIntent {
        let s = select_skillset(SkillConfig::S3, &assets::skill_library()).unwrap();
        ResearchIntent {
            analysis_type: if pops.len() == 1 { AnalysisType::SinglePopulation } else { AnalysisType::MultiPopulation },
            populations: pops.iter().map(|p| p.to_string()).collect(),
            chromosomes: None,
            regions: Some(vec![s.region("HBB").unwrap().into()]),
            focus: Focus::AllVariants,
        }
    }

    fn hbb_measurements(rows: u64) -> Measurements {
        Measurements {
            per_unit: vec![UnitMeasurement {
                chromosome: Chromosome::parse("11").unwrap(),
                region: Some("HBB".into()),
                rows,
                bytes: rows * 10_000,
            }],
            total_vcpus: 48,
            measured_at: at(0),
        }
    }

    #[test]
    fn single_unit_single_population() {
        let dag = generate_dag(&hbb_intent(&["YRI"]), "fp", &hbb_measurements(136), &GeneratorConfig::default()).unwrap();
        assert_eq!(dag.tasks.len(), 5);
        assert_eq!(dag.edges.len(), 5);
        let ids: Vec<&str> = dag.tasks.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "frequency-chr11-HBB-YRI",
                "individuals-chr11-HBB-001",
                "individuals_merge-chr11-HBB",
                "mutation_overlap-chr11-HBB-YRI",
                "sifting-chr11-HBB"
            ]
        );
        assert_eq!(dag.metadata.parallelism["chr11-HBB"], 1);
    }

    #[test]
    fn round_trip_and_measured_at_isolation() {
        let cfg = GeneratorConfig::default();
        let dag = generate_dag(&hbb_intent(&["YRI", "ESN"]), "fp", &hbb_measurements(20_000), &cfg).unwrap();
        let bytes = serialize_dag(&dag);
        assert!(bytes.ends_with(b"}\n"));
        assert_eq!(serialize_dag(&parse_dag(&bytes).unwrap()), bytes);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("{\"name\":\"1000genome-"));
        let key_order: Vec<usize> = ["\"name\"", "\"version\"", "\"metadata\"", "\"tasks\"", "\"edges\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(key_order.windows(2).all(|w| w[0] < w[1]));

        let mut later = hbb_measurements(20_000);
        later.measured_at = at(3600);
        let other = serialize_dag(&generate_dag(&hbb_intent(&["YRI", "ESN"]), "fp", &later, &cfg).unwrap());
        let a = String::from_utf8(bytes).unwrap().replace(&dag.metadata.measured_at, "");
        let b = String::from_utf8(other).unwrap().replace(&at(3600).to_rfc3339_opts(SecondsFormat::Secs, true), "");
        assert_eq!(a, b);
    }

    #[test]
    fn missing_measurement() {
        let mut m = hbb_measurements(1);
        m.per_unit.clear();
        assert_eq!(
            generate_dag(&hbb_intent(&["YRI"]), "fp", &m, &GeneratorConfig::default()),
            Err(ComposerError::MissingMeasurement("chr11-HBB".into()))
        );
    }

    #[test]
    fn check_detects_cycles_and_dangling_edges() {
        let mut dag = generate_dag(&hbb_intent(&["YRI"]), "fp", &hbb_measurements(1), &GeneratorConfig::default()).unwrap();
        let mut cyclic = dag.clone();
        cyclic.edges.push(("individuals_merge-chr11-HBB".into(), "individuals-chr11-HBB-001".into()));
        assert!(matches!(cyclic.check(), Err(DagError::Cycle(_))));
        dag.edges.push(("nope".into(), "sifting-chr11-HBB".into()));
        assert_eq!(dag.check(), Err(DagError::DanglingEdge("nope".into())));
    }

    proptest! {
        #[test]
        fn task_count_formula(rows in 0u64..500_000, npop in 1usize..4) {
            let pops = ["AFR", "EUR", "EAS"];
            let dag = generate_dag(&hbb_intent(&pops[..npop]), "fp", &hbb_measurements(rows), &GeneratorConfig::default()).unwrap();
            let j = dag.metadata.parallelism["chr11-HBB"] as usize;
            prop_assert_eq!(dag.tasks.len(), j + 2 + 2 * npop);
            prop_assert_eq!(dag.count(TaskType::Individuals), j);
            let chunk_rows: u64 = dag.tasks.iter().filter(|t| t.task_type == TaskType::Individuals).map(|t| t.rows).sum();
            prop_assert_eq!(chunk_rows, rows);
        }
    }
}
