use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::calibrate::advisory_parallelism;
use super::{human_bytes, plan_staging, units, CalibrationConfig, ComposerError, StagingConfig, StagingPlan};
use crate::intent::ResearchIntent;
use crate::skills::SkillSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisoryPlan {
    pub intent: ResearchIntent,
    pub staging: StagingPlan,
    /// Estimated J per unit label.
    pub advisory_parallelism: BTreeMap<String, u32>,
    pub description: String,
    pub skill_fingerprint: String,
}

/// Phase-2 plan from estimates only; nothing is downloaded.
pub fn plan_advisory(
    intent: &ResearchIntent,
    skills: &SkillSet,
    staging_config: &StagingConfig,
    calibration: &CalibrationConfig,
) -> Result<AdvisoryPlan, ComposerError> {
    let staging = plan_staging(intent, skills, staging_config)?;
    let mut advisory = BTreeMap::new();
    for unit in units(intent) {
        let j = match (staging.degraded, staging.action_for(&unit), skills.data_source(unit.chromosome)) {
            (false, Some(action), Some(source)) => {
                advisory_parallelism(source.bytes_per_row().rows_for_bytes(action.est_bytes), calibration)
            }
            _ => calibration.advisory_cap.max(1),
        };
        advisory.insert(unit.label(), j);
    }
    let description = describe(intent, skills, &staging, &advisory);
    Ok(AdvisoryPlan {
        intent: intent.clone(),
        staging,
        advisory_parallelism: advisory,
        description,
        skill_fingerprint: skills.fingerprint().to_string(),
    })
}

fn describe(
    intent: &ResearchIntent,
    skills: &SkillSet,
    staging: &StagingPlan,
    advisory: &BTreeMap<String, u32>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Analysis: {}", intent.analysis_type.as_str().replace('_', " "));
    let pops: Vec<String> = intent
        .populations
        .iter()
        .map(|code| match skills.population(code) {
            Some(p) => format!("{code} ({})", p.name),
            None => code.clone(),
        })
        .collect();
    let _ = writeln!(out, "Populations: {}", pops.join(", "));
    if let Some(regions) = &intent.regions {
        let list: Vec<String> = regions.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(out, "Regions (GRCh37): {}", list.join(", "));
    }
    if let Some(chromosomes) = &intent.chromosomes {
        let list: Vec<String> = chromosomes.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "Chromosomes: {}", list.join(", "));
    }
    let _ = writeln!(out, "Focus: {}", intent.focus.as_str().replace('_', " "));
    let _ = writeln!(
        out,
        "Staging: {} action(s), estimated {} of {} in full files ({:.1}% avoided)",
        staging.actions.len(),
        human_bytes(staging.total_est_bytes),
        human_bytes(staging.total_full_bytes),
        staging.savings_fraction * 100.0
    );
    if staging.degraded {
        let _ = writeln!(out, "  no data source document loaded; sizes are whole-file defaults");
    }
    for a in &staging.actions {
        let unit = a.unit();
        let target = match &a.region {
            Some(r) => format!("chr{} {}", a.chromosome, r.name),
            None => format!("chr{}", a.chromosome),
        };
        let j = advisory.get(&unit.label()).copied();
        let _ = write!(out, "  - {} {target}: ~{}", a.kind.as_str(), human_bytes(a.est_bytes));
        if let Some(j) = j {
            let _ = write!(out, ", advisory parallelism {j}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::evalharness::{parse_dataset, GoldOutcome};
    use crate::skills::{select_skillset, SkillConfig};

    #[test]
    fn description_mentions_every_entity() {
        let s3 = select_skillset(SkillConfig::S3, &assets::skill_library()).unwrap();
        for case in parse_dataset(assets::QUERIES_JSONL, &s3).unwrap() {
            let GoldOutcome::Intent(intent) = case.gold.outcome else { continue };
            let plan = plan_advisory(&intent, &s3, &StagingConfig::default(), &CalibrationConfig::default()).unwrap();
            for p in &intent.populations {
                assert!(plan.description.contains(p.as_str()), "{}", case.id);
            }
            for r in intent.regions.iter().flatten() {
                assert!(plan.description.contains(&r.name), "{}", case.id);
                assert!(plan.description.contains(&format!("chr{}", r.chromosome)), "{}", case.id);
            }
            for c in intent.chromosomes.iter().flatten() {
                assert!(plan.description.contains(&format!("chr{c}")), "{}", case.id);
            }
        }
    }

    #[test]
    fn degraded_plan_uses_cap() {
        let lib = assets::skill_library();
        let s1 = select_skillset(SkillConfig::S1, &lib).unwrap();
        let s3 = select_skillset(SkillConfig::S3, &lib).unwrap();
        let case = &parse_dataset(assets::QUERIES_JSONL, &s3).unwrap()[0];
        let GoldOutcome::Intent(intent) = &case.gold.outcome else { panic!() };
        let plan = plan_advisory(intent, &s1, &StagingConfig::default(), &CalibrationConfig::default()).unwrap();
        assert!(plan.staging.degraded);
        assert_eq!(plan.advisory_parallelism["chr21"], 100);
    }
}
