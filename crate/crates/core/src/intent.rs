//! The `ResearchIntent` contract between intent extraction and DAG generation.
//!
//! Intents are validated against the active SkillSet, canonicalized (sorted,
//! de-duplicated lists) and hashed over a fixed-key-order compact JSON form:
//!
//! ```text
//! {"analysis_type":..,"populations":[..],"chromosomes":[..]|null,"regions":[..]|null,"focus":..}
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::genome::Chromosome;
use crate::skills::{SkillKind, SkillSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisType {
    SinglePopulation,
    PopulationComparison,
    MultiPopulation,
    RegionAnalysis,
}

impl AnalysisType {
    pub const ALL: [AnalysisType; 4] = [
        AnalysisType::SinglePopulation,
        AnalysisType::PopulationComparison,
        AnalysisType::MultiPopulation,
        AnalysisType::RegionAnalysis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnalysisType::SinglePopulation => "single_population",
            AnalysisType::PopulationComparison => "population_comparison",
            AnalysisType::MultiPopulation => "multi_population",
            AnalysisType::RegionAnalysis => "region_analysis",
        }
    }

    /// Whether `n` populations satisfy this type's cardinality rule.
    pub fn admits(self, n: usize) -> bool {
        match self {
            AnalysisType::SinglePopulation => n == 1,
            AnalysisType::PopulationComparison => n >= 2,
            AnalysisType::MultiPopulation | AnalysisType::RegionAnalysis => n >= 1,
        }
    }
}

impl fmt::Display for AnalysisType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnalysisType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        AnalysisType::ALL.into_iter().find(|a| a.as_str() == s.trim()).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Focus {
    #[default]
    AllVariants,
    Deleterious,
    Common,
    Rare,
}

impl Focus {
    pub const ALL: [Focus; 4] = [Focus::AllVariants, Focus::Deleterious, Focus::Common, Focus::Rare];

    pub fn as_str(self) -> &'static str {
        match self {
            Focus::AllVariants => "all_variants",
            Focus::Deleterious => "deleterious",
            Focus::Common => "common",
            Focus::Rare => "rare",
        }
    }
}

impl fmt::Display for Focus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Focus {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Focus::ALL.into_iter().find(|a| a.as_str() == s.trim()).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenomicRegion {
    pub name: String,
    pub chromosome: Chromosome,
    pub start: u64,
    pub end: u64,
}

impl GenomicRegion {
    fn sort_key(&self) -> (Chromosome, u64, u64, String) {
        (self.chromosome, self.start, self.end, self.name.to_lowercase())
    }

    pub fn span(&self) -> u64 {
        self.end - self.start + 1
    }
}

impl From<&crate::skills::RegionEntry> for GenomicRegion {
    fn from(r: &crate::skills::RegionEntry) -> Self {
        GenomicRegion {
            name: r.name.clone(),
            chromosome: r.chromosome,
            start: r.start,
            end: r.end,
        }
    }
}

impl fmt::Display for GenomicRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (chr{}:{}-{})", self.name, self.chromosome, self.start, self.end)
    }
}

/// Field order here is the canonical serialization order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearchIntent {
    pub analysis_type: AnalysisType,
    pub populations: Vec<String>,
    pub chromosomes: Option<Vec<Chromosome>>,
    pub regions: Option<Vec<GenomicRegion>>,
    pub focus: Focus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum IntentViolation {
    #[error("missing field `{field}`")]
    MissingField { field: String },
    #[error("field `{field}` has the wrong type")]
    WrongType { field: String },
    #[error("unknown {field} value `{value}`")]
    UnknownEnumValue { field: String, value: String },
    #[error("unknown population code `{code}`")]
    UnknownPopulationCode { code: String },
    #[error("duplicate population code `{code}`")]
    DuplicatePopulation { code: String },
    #[error("populations must not be empty")]
    EmptyPopulations,
    #[error("{analysis_type} does not admit {count} population(s)")]
    Cardinality { analysis_type: AnalysisType, count: usize },
    #[error("invalid chromosome `{value}`")]
    InvalidChromosome { value: String },
    #[error("invalid region `{region}`: {reason}")]
    InvalidRegion { region: String, reason: String },
    #[error("neither chromosomes nor regions given")]
    NoLocus,
    #[error("region `{region}` lies on a chromosome missing from `chromosomes`")]
    InconsistentRegionChromosome { region: String },
}

/// Per-field comparison outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FieldScore {
    pub analysis_type: bool,
    pub populations: bool,
    pub chromosomes: bool,
    pub regions: bool,
    pub focus: bool,
    pub full_match: bool,
}

impl FieldScore {
    pub fn all(value: bool) -> Self {
        FieldScore {
            analysis_type: value,
            populations: value,
            chromosomes: value,
            regions: value,
            focus: value,
            full_match: value,
        }
    }

    pub fn fields(&self) -> [(&'static str, bool); 5] {
        [
            ("analysis_type", self.analysis_type),
            ("populations", self.populations),
            ("chromosomes", self.chromosomes),
            ("regions", self.regions),
            ("focus", self.focus),
        ]
    }

    pub fn matched_fields(&self) -> usize {
        self.fields().iter().filter(|(_, ok)| *ok).count()
    }
}

/// Validates an untyped intent record and returns it in canonical form.
pub fn validate(raw: &Value, skills: &SkillSet) -> Result<ResearchIntent, Vec<IntentViolation>> {
    let intent = from_raw(raw)?;
    validate_intent(&intent, skills)
}

/// Validates a typed intent and returns it in canonical form.
pub fn validate_intent(
    intent: &ResearchIntent,
    skills: &SkillSet,
) -> Result<ResearchIntent, Vec<IntentViolation>> {
    let mut violations = Vec::new();

    if intent.populations.is_empty() {
        violations.push(IntentViolation::EmptyPopulations);
    }
    let known_codes = skills.has(SkillKind::Populations);
    let mut seen = BTreeSet::new();
    for code in &intent.populations {
        let valid = if known_codes {
            skills.population(code).is_some()
        } else {
            code.len() == 3 && code.bytes().all(|b| b.is_ascii_uppercase())
        };
        if !valid {
            violations.push(IntentViolation::UnknownPopulationCode { code: code.clone() });
        } else if !seen.insert(code.as_str()) {
            violations.push(IntentViolation::DuplicatePopulation { code: code.clone() });
        }
    }
    if !intent.populations.is_empty() && !intent.analysis_type.admits(seen.len().max(1)) {
        violations.push(IntentViolation::Cardinality {
            analysis_type: intent.analysis_type,
            count: seen.len(),
        });
    }

    let chromosomes = intent.chromosomes.as_ref().filter(|c| !c.is_empty());
    let regions = intent.regions.as_ref().filter(|r| !r.is_empty());
    if chromosomes.is_none() && regions.is_none() {
        violations.push(IntentViolation::NoLocus);
    }
    for r in regions.into_iter().flatten() {
        if r.name.trim().is_empty() {
            violations.push(IntentViolation::InvalidRegion {
                region: r.name.clone(),
                reason: "empty name".into(),
            });
        }
        if r.start < 1 || r.end <= r.start {
            violations.push(IntentViolation::InvalidRegion {
                region: r.name.clone(),
                reason: format!("requires end > start >= 1, got {}-{}", r.start, r.end),
            });
        }
        if let Some(cs) = chromosomes {
            if !cs.contains(&r.chromosome) {
                violations.push(IntentViolation::InconsistentRegionChromosome {
                    region: r.name.clone(),
                });
            }
        }
    }

    if violations.is_empty() {
        Ok(canonicalize(intent))
    } else {
        Err(violations)
    }
}

/// Sorts and de-duplicates every list; empty optional lists become `None`.
pub fn canonicalize(intent: &ResearchIntent) -> ResearchIntent {
    let populations: BTreeSet<String> = intent.populations.iter().cloned().collect();
    let chromosomes = intent.chromosomes.as_ref().and_then(|cs| {
        let set: BTreeSet<Chromosome> = cs.iter().copied().collect();
        (!set.is_empty()).then(|| set.into_iter().collect())
    });
    let regions = intent.regions.as_ref().and_then(|rs| {
        let mut v = rs.clone();
        v.sort_by_key(GenomicRegion::sort_key);
        v.dedup_by(|a, b| a.sort_key() == b.sort_key());
        (!v.is_empty()).then_some(v)
    });
    ResearchIntent {
        analysis_type: intent.analysis_type,
        populations: populations.into_iter().collect(),
        chromosomes,
        regions,
        focus: intent.focus,
    }
}

/// Compact JSON of the canonical form; the input to [`intent_hash`].
pub fn canonical_json(intent: &ResearchIntent) -> String {
    serde_json::to_string(&canonicalize(intent)).expect("intent serializes")
}

/// SHA-256 hex digest of the canonical serialization.
pub fn intent_hash(intent: &ResearchIntent) -> String {
    hex::encode(Sha256::digest(canonical_json(intent).as_bytes()))
}

/// Field-wise comparison; lists compare as sets, region names case-insensitively.
pub fn compare(predicted: &ResearchIntent, gold: &ResearchIntent) -> FieldScore {
    let p = canonicalize(predicted);
    let g = canonicalize(gold);
    let region_set = |r: &Option<Vec<GenomicRegion>>| {
        r.as_ref().map(|v| v.iter().map(GenomicRegion::sort_key).collect::<BTreeSet<_>>())
    };
    let mut score = FieldScore {
        analysis_type: p.analysis_type == g.analysis_type,
        populations: p.populations == g.populations,
        chromosomes: p.chromosomes == g.chromosomes,
        regions: region_set(&p.regions) == region_set(&g.regions),
        focus: p.focus == g.focus,
        full_match: false,
    };
    score.full_match = score.matched_fields() == 5;
    score
}

fn from_raw(raw: &Value) -> Result<ResearchIntent, Vec<IntentViolation>> {
    let mut violations = Vec::new();
    let obj = match raw.as_object() {
        Some(o) => o,
        None => {
            return Err(vec![IntentViolation::WrongType {
                field: "intent".into(),
            }])
        }
    };
    let wrong = |field: &str| IntentViolation::WrongType { field: field.into() };

    let analysis_type = match obj.get("analysis_type") {
        None | Some(Value::Null) => {
            violations.push(IntentViolation::MissingField {
                field: "analysis_type".into(),
            });
            None
        }
        Some(Value::String(s)) => match s.parse() {
            Ok(a) => Some(a),
            Err(()) => {
                violations.push(IntentViolation::UnknownEnumValue {
                    field: "analysis_type".into(),
                    value: s.clone(),
                });
                None
            }
        },
        Some(_) => {
            violations.push(wrong("analysis_type"));
            None
        }
    };

    let focus = match obj.get("focus") {
        None | Some(Value::Null) => Focus::AllVariants,
        Some(Value::String(s)) => s.parse().unwrap_or_else(|()| {
            violations.push(IntentViolation::UnknownEnumValue {
                field: "focus".into(),
                value: s.clone(),
            });
            Focus::AllVariants
        }),
        Some(_) => {
            violations.push(wrong("focus"));
            Focus::AllVariants
        }
    };

    let mut populations = Vec::new();
    match obj.get("populations") {
        None | Some(Value::Null) => violations.push(IntentViolation::EmptyPopulations),
        Some(Value::Array(items)) => {
            for item in items {
                match item.as_str() {
                    Some(s) => populations.push(s.trim().to_string()),
                    None => violations.push(wrong("populations")),
                }
            }
        }
        Some(_) => violations.push(wrong("populations")),
    }

    let chromosomes = match obj.get("chromosomes") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => {
            let mut out = Vec::new();
            for item in items {
                match chromosome_value(item) {
                    Some(c) => out.push(c),
                    None => violations.push(IntentViolation::InvalidChromosome {
                        value: value_label(item),
                    }),
                }
            }
            Some(out)
        }
        Some(_) => {
            violations.push(wrong("chromosomes"));
            None
        }
    };

    let regions = match obj.get("regions") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => {
            let mut out = Vec::new();
            for item in items {
                match region_value(item) {
                    Ok(r) => out.push(r),
                    Err(v) => violations.push(v),
                }
            }
            Some(out)
        }
        Some(_) => {
            violations.push(wrong("regions"));
            None
        }
    };

    match (analysis_type, violations.is_empty()) {
        (Some(analysis_type), true) => Ok(ResearchIntent {
            analysis_type,
            populations,
            chromosomes,
            regions,
            focus,
        }),
        _ => Err(violations),
    }
}

fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn chromosome_value(v: &Value) -> Option<Chromosome> {
    match v {
        Value::String(s) => Chromosome::parse(s),
        Value::Number(n) => n.as_u64().and_then(|n| Chromosome::parse(&n.to_string())),
        _ => None,
    }
}

fn region_value(v: &Value) -> Result<GenomicRegion, IntentViolation> {
    let label = v
        .get("name")
        .and_then(Value::as_str)
        .unwrap_or("?")
        .to_string();
    let bad = |reason: &str| IntentViolation::InvalidRegion {
        region: label.clone(),
        reason: reason.into(),
    };
    let obj = v.as_object().ok_or_else(|| bad("not an object"))?;
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("missing name"))?;
    let chromosome = obj
        .get("chromosome")
        .and_then(chromosome_value)
        .ok_or_else(|| bad("missing or invalid chromosome"))?;
    let coord = |key: &str| -> Result<u64, IntentViolation> {
        match obj.get(key) {
            Some(Value::Number(n)) => n.as_u64().ok_or_else(|| bad(&format!("{key} is not a positive integer"))),
            Some(Value::String(s)) => s
                .replace(',', "")
                .parse()
                .map_err(|_| bad(&format!("{key} is not a positive integer"))),
            _ => Err(bad(&format!("missing {key}"))),
        }
    };
    Ok(GenomicRegion {
        name: name.to_string(),
        chromosome,
        start: coord("start")?,
        end: coord("end")?,
    })
}
