//! Tiered query dataset, S0..S3 ablation runs and report rendering.

mod dataset;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::extraction::{ExtractionError, ExtractionResult, Extractor, Outcome};
use crate::intent::{compare, FieldScore};
use crate::skills::{select_skillset, SkillConfig, SkillDocument, SkillError};

pub use dataset::{load_dataset, parse_dataset, DatasetError, Gold, GoldOutcome, QueryCase, Tier};
pub use report::{parse_csv, render_report, ReportFormat, ReportParseError};

pub const FIELDS: [&str; 5] = ["analysis_type", "populations", "chromosomes", "regions", "focus"];

/// Scores one extraction outcome against a gold annotation.
pub fn score_case(gold: &Gold, result: &Result<ExtractionResult, ExtractionError>) -> FieldScore {
    let outcome = match result {
        Ok(r) => &r.outcome,
        Err(_) => return FieldScore::all(false),
    };
    let alternate = || match (&gold.alternate_intent, outcome) {
        (Some(alt), Outcome::Intent(i)) => compare(i, alt).full_match,
        _ => false,
    };
    match (&gold.outcome, outcome) {
        (GoldOutcome::Intent(g), Outcome::Intent(p)) => compare(p, g),
        (GoldOutcome::Intent(_), _) => FieldScore::all(false),
        (GoldOutcome::ExpectClarification(fields), Outcome::Clarification(c)) => {
            FieldScore::all(fields.iter().all(|f| c.missing_fields.contains(f)))
        }
        (GoldOutcome::ExpectRejection(terms), Outcome::Rejection(r)) => {
            let norm = |v: &[String]| {
                let mut v: Vec<String> = v.iter().map(|t| t.trim().to_lowercase()).collect();
                v.sort();
                v.dedup();
                v
            };
            FieldScore::all(norm(terms) == norm(&r.unresolved_terms))
        }
        (GoldOutcome::ExpectRejection(_), _) => FieldScore::all(alternate()),
        (GoldOutcome::ExpectClarification(_), _) => FieldScore::all(false),
    }
}

/// Aggregate counts for one (config, tier) cell or a config's overall row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub full_match_count: usize,
    /// Matches per field, keyed by field name.
    pub field_matches: BTreeMap<String, usize>,
    pub faults: usize,
}

impl Cell {
    fn add(&mut self, score: &FieldScore, fault: bool) {
        self.n += 1;
        self.full_match_count += usize::from(score.full_match);
        for (name, ok) in score.fields() {
            *self.field_matches.entry(name.to_string()).or_default() += usize::from(ok);
        }
        self.faults += usize::from(fault);
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.full_match_count, self.n)
    }

    pub fn field_accuracy(&self, field: &str) -> f64 {
        ratio(self.field_matches.get(field).copied().unwrap_or(0), self.n)
    }
}

fn ratio(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub config: SkillConfig,
    pub tiers: BTreeMap<Tier, Cell>,
    pub overall: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationReport {
    pub extractor: String,
    pub configs: Vec<ConfigReport>,
}

impl AblationReport {
    pub fn config(&self, config: SkillConfig) -> Option<&ConfigReport> {
        self.configs.iter().find(|c| c.config == config)
    }
}

/// Runs every case under every config. Extractor faults are scored as misses.
pub fn run_ablation(
    cases: &[QueryCase],
    configs: &[SkillConfig],
    library: &[SkillDocument],
    extractor: &Extractor,
) -> Result<AblationReport, SkillError> {
    let mut reports = Vec::new();
    for &config in configs {
        let skills = select_skillset(config, library)?;
        let mut tiers: BTreeMap<Tier, Cell> = BTreeMap::new();
        let mut overall = Cell::default();
        for case in cases {
            let result = extractor.extract_blocking(&case.query, &skills);
            if let Err(e) = &result {
                tracing::warn!(case = %case.id, config = %config, error = %e, "extraction fault");
            }
            let score = score_case(&case.gold, &result);
            tiers.entry(case.tier).or_default().add(&score, result.is_err());
            overall.add(&score, result.is_err());
        }
        reports.push(ConfigReport { config, tiers, overall });
    }
    Ok(AblationReport {
        extractor: extractor.id(),
        configs: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::extraction::{ClarificationRequest, MissingField, RejectionNotice};

    fn result(outcome: Outcome) -> Result<ExtractionResult, ExtractionError> {
        Ok(ExtractionResult {
            outcome,
            skill_fingerprint: String::new(),
            extractor_id: "test".into(),
            elapsed_ms: 0,
            token_cost: None,
        })
    }

    #[test]
    fn clarification_superset_matches() {
        let gold = Gold {
            outcome: GoldOutcome::ExpectClarification(vec![MissingField::Populations]),
            alternate_intent: None,
        };
        let r = result(Outcome::Clarification(ClarificationRequest {
            missing_fields: vec![MissingField::Populations, MissingField::ChromosomesOrRegions],
            question: String::new(),
        }));
        assert!(score_case(&gold, &r).full_match);
    }

    #[test]
    fn rejection_requires_term_set() {
        let gold = Gold {
            outcome: GoldOutcome::ExpectRejection(vec!["HBP".into()]),
            alternate_intent: None,
        };
        let rej = |terms: &[&str]| {
            result(Outcome::Rejection(RejectionNotice {
                unresolved_terms: terms.iter().map(|t| t.to_string()).collect(),
                message: String::new(),
            }))
        };
        assert!(score_case(&gold, &rej(&["hbp"])).full_match);
        assert!(!score_case(&gold, &rej(&["HBP", "Mende"])).full_match);
        let fault = Err(ExtractionError::Timeout { timeout_ms: 1 });
        assert!(!score_case(&gold, &fault).full_match);
    }

    #[test]
    fn rule_ablation_tier_ceilings() {
        let lib = assets::skill_library();
        let s3 = select_skillset(SkillConfig::S3, &lib).unwrap();
        let cases = parse_dataset(assets::QUERIES_JSONL, &s3).unwrap();
        let report = run_ablation(&cases, &SkillConfig::ALL, &lib, &Extractor::Rule).unwrap();
        let acc = |c, t| report.config(c).unwrap().tiers[&t].accuracy();
        for c in [SkillConfig::S1, SkillConfig::S3] {
            assert_eq!(acc(c, Tier::T1), 1.0, "{c} T1");
            assert_eq!(acc(c, Tier::T2), 1.0, "{c} T2");
        }
        assert_eq!(acc(SkillConfig::S0, Tier::T2), 0.0);
        let overall = |c| report.config(c).unwrap().overall.accuracy();
        assert!(overall(SkillConfig::S3) >= overall(SkillConfig::S1));
        assert!(overall(SkillConfig::S1) >= overall(SkillConfig::S0));
        for c in &report.configs {
            for cell in c.tiers.values().chain([&c.overall]) {
                for f in FIELDS {
                    assert!(cell.field_accuracy(f) >= cell.accuracy());
                }
            }
        }
    }
}
