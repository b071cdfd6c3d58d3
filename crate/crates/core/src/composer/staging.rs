use serde::{Deserialize, Serialize};

use super::{units, ComposerError, Unit};
use crate::genome::Chromosome;
use crate::intent::{GenomicRegion, ResearchIntent};
use crate::skills::{div_round_half_up, Extraction, SkillKind, SkillSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StagingConfig {
    /// Floor for region extraction estimates (index and header overhead).
    pub min_extract_bytes: u64,
    /// Bytes per base pair assumed when no data_sources document is loaded.
    pub default_bytes_per_bp: u64,
}

impl Default for StagingConfig {
    fn default() -> Self {
        StagingConfig {
            min_extract_bytes: 1_000_000,
            default_bytes_per_bp: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagingAction {
    pub kind: Extraction,
    pub chromosome: Chromosome,
    /// Present iff `kind` is `region_extract`.
    pub region: Option<GenomicRegion>,
    pub source_url: String,
    pub est_bytes: u64,
    pub full_bytes: u64,
}

impl StagingAction {
    /// The measurement key this action produces.
    pub fn unit(&self) -> Unit {
        Unit {
            chromosome: self.chromosome,
            region: self.region.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagingPlan {
    pub actions: Vec<StagingAction>,
    pub total_est_bytes: u64,
    pub total_full_bytes: u64,
    pub savings_fraction: f64,
    /// Estimates fell back to whole-file defaults (no data_sources loaded).
    pub degraded: bool,
}

impl StagingPlan {
    fn from_actions(actions: Vec<StagingAction>, degraded: bool) -> Self {
        let total_est_bytes = actions.iter().map(|a| a.est_bytes).sum();
        // a chromosome file counts once however many regions it serves
        let mut seen = Vec::new();
        let mut total_full_bytes = 0;
        for a in &actions {
            if !seen.contains(&a.chromosome) {
                seen.push(a.chromosome);
                total_full_bytes += a.full_bytes;
            }
        }
        let savings_fraction = if total_full_bytes == 0 {
            0.0
        } else {
            1.0 - total_est_bytes as f64 / total_full_bytes as f64
        };
        StagingPlan {
            actions,
            total_est_bytes,
            total_full_bytes,
            savings_fraction: savings_fraction.max(0.0),
            degraded,
        }
    }

    /// The action that stages data for `unit`: its own extract, or the
    /// chromosome's full download.
    pub fn action_for(&self, unit: &Unit) -> Option<&StagingAction> {
        self.actions
            .iter()
            .find(|a| a.unit() == *unit)
            .or_else(|| self.actions.iter().find(|a| a.chromosome == unit.chromosome && a.region.is_none()))
    }
}

fn span_estimate(region: &GenomicRegion, full_bytes: u64, config: &StagingConfig) -> u64 {
    let est = div_round_half_up(
        region.span() as u128 * full_bytes as u128,
        region.chromosome.grch37_length() as u128,
    );
    est.max(config.min_extract_bytes).min(full_bytes)
}

/// Region extraction per region where the source supports it, whole-file
/// download otherwise.
pub fn plan_staging(
    intent: &ResearchIntent,
    skills: &SkillSet,
    config: &StagingConfig,
) -> Result<StagingPlan, ComposerError> {
    let degraded = !skills.has(SkillKind::DataSources);
    let mut actions: Vec<StagingAction> = Vec::new();
    for unit in units(intent) {
        let action = if degraded {
            let full = unit.chromosome.grch37_length() * config.default_bytes_per_bp;
            StagingAction {
                kind: Extraction::FullDownload,
                chromosome: unit.chromosome,
                region: None,
                source_url: String::new(),
                est_bytes: full,
                full_bytes: full,
            }
        } else {
            let source = skills
                .data_source(unit.chromosome)
                .ok_or(ComposerError::UnknownChromosomeSource(unit.chromosome))?;
            match (&unit.region, source.extraction) {
                (Some(region), Extraction::RegionExtract) => StagingAction {
                    kind: Extraction::RegionExtract,
                    chromosome: unit.chromosome,
                    region: Some(region.clone()),
                    source_url: source.url(),
                    est_bytes: skills
                        .transfer_estimate(&region.name)
                        .map(|b| b.min(source.full_size_bytes))
                        .unwrap_or_else(|| span_estimate(region, source.full_size_bytes, config)),
                    full_bytes: source.full_size_bytes,
                },
                _ => StagingAction {
                    kind: Extraction::FullDownload,
                    chromosome: unit.chromosome,
                    region: None,
                    source_url: source.url(),
                    est_bytes: source.full_size_bytes,
                    full_bytes: source.full_size_bytes,
                },
            }
        };
        if !actions.contains(&action) {
            actions.push(action);
        }
    }
    Ok(StagingPlan::from_actions(actions, degraded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::intent::{AnalysisType, Focus};
    use crate::skills::{select_skillset, SkillConfig};

    fn skills(c: SkillConfig) -> SkillSet {
        select_skillset(c, &assets::skill_library()).unwrap()
    }

    fn intent(regions: &[&str], chromosomes: &[&str]) -> ResearchIntent {
        let s = skills(SkillConfig::S3);
        ResearchIntent {
            analysis_type: AnalysisType::SinglePopulation,
            populations: vec!["EUR".into()],
            chromosomes: (!chromosomes.is_empty()).then(|| chromosomes.iter().map(|c| Chromosome::parse(c).unwrap()).collect()),
            regions: (!regions.is_empty()).then(|| regions.iter().map(|r| s.region(r).unwrap().into()).collect()),
            focus: Focus::AllVariants,
        }
    }

    #[test]
    fn hla_is_region_extract() {
        let plan = plan_staging(&intent(&["HLA"], &[]), &skills(SkillConfig::S3), &StagingConfig::default()).unwrap();
        let a = &plan.actions[0];
        assert_eq!(a.kind, Extraction::RegionExtract);
        assert_eq!(a.full_bytes, 13_000_000_000);
        assert!(a.est_bytes * 5 < a.full_bytes);
    }

    #[test]
    fn whole_chromosome_is_full_download() {
        let plan = plan_staging(&intent(&[], &["21"]), &skills(SkillConfig::S3), &StagingConfig::default()).unwrap();
        assert_eq!(plan.actions[0].kind, Extraction::FullDownload);
        assert_eq!(plan.actions[0].est_bytes, plan.actions[0].full_bytes);
        assert_eq!(plan.savings_fraction, 0.0);
    }

    #[test]
    fn six_region_savings() {
        let regions = ["HLA", "BRCA1", "BRCA2", "CFTR", "HBB", "APOE"];
        let plan = plan_staging(&intent(&regions, &[]), &skills(SkillConfig::S3), &StagingConfig::default()).unwrap();
        assert_eq!(plan.actions.len(), 6);
        assert_eq!(plan.total_full_bytes, 21_600_000_000);
        assert!((plan.total_est_bytes as f64 / 1.69e9 - 1.0).abs() <= 0.05);
        assert!(plan.savings_fraction >= 0.91);
    }

    #[test]
    fn span_fallback_is_floored() {
        let s = skills(SkillConfig::S3);
        let hbb: GenomicRegion = s.region("HBB").unwrap().into();
        let est = span_estimate(&hbb, 2_100_000_000, &StagingConfig::default());
        assert_eq!(est, 1_000_000);
    }

    #[test]
    fn without_data_sources_plan_degrades() {
        let plan = plan_staging(&intent(&["HLA"], &[]), &skills(SkillConfig::S1), &StagingConfig::default()).unwrap();
        assert!(plan.degraded);
        assert_eq!(plan.actions[0].kind, Extraction::FullDownload);
    }
}
