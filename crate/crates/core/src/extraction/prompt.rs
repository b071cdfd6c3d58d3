use std::fmt::Write;

use crate::skills::{SkillContent, SkillKind, SkillSet};

const SCHEMA: &str = "ResearchIntent:
  analysis_type: single_population | population_comparison
                 | multi_population | region_analysis
  populations:   list[PopulationCode]   # e.g., [EUR, AFR]
  chromosomes:   list[str] | null
  regions:       list[GenomicRegion] | null
  focus:         all_variants | deleterious | common | rare

GenomicRegion:
  name:       str
  chromosome: str    # 1-22, X or Y
  start:      int    # GRCh37, 1-based
  end:        int
";

const OUTPUT_RULES: &str = "Respond with exactly one JSON object and no other text.
If the query maps onto the tables above, respond with the ResearchIntent object itself.
If required information is missing, respond with
{\"clarification\": {\"missing_fields\": [\"populations\" | \"chromosomes_or_regions\"], \"question\": \"...\"}}.
If the query names populations, genes or regions that are not in the tables, respond with
{\"rejection\": {\"unresolved_terms\": [\"...\"], \"message\": \"...\"}}.
";

fn table(out: &mut String, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in rows {
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    out.push('\n');
}

/// Everything in the prompt except the query. Byte-identical for a given SkillSet.
pub fn build_preamble(skills: &SkillSet) -> String {
    let mut out = String::from(
        "# Task\n\nExtract a structured ResearchIntent from a research question about the 1000 Genomes phase 3 data.\n\n",
    );

    if let Some(doc) = skills.document(SkillKind::ComposerGuidelines) {
        out.push_str("# Guidelines\n\n");
        out.push_str(doc.body().trim());
        out.push_str("\n\n");
    }

    for doc in skills.documents() {
        match &doc.content {
            SkillContent::Populations { populations, synonyms } => {
                out.push_str("# Populations\n\n");
                table(
                    &mut out,
                    &["code", "name", "super_population", "sample_count"],
                    populations.iter().map(|p| {
                        vec![p.code.clone(), p.name.clone(), p.super_population.clone(), p.sample_count.to_string()]
                    }),
                );
                out.push_str("## Population synonyms\n\n");
                table(
                    &mut out,
                    &["term", "code"],
                    synonyms.iter().map(|s| vec![s.term.clone(), s.targets.join(";")]),
                );
            }
            SkillContent::GenomicRegions { regions, synonyms } => {
                out.push_str("# Genomic regions (GRCh37)\n\n");
                table(
                    &mut out,
                    &["name", "chromosome", "start", "end"],
                    regions.iter().map(|r| {
                        vec![r.name.clone(), r.chromosome.to_string(), r.start.to_string(), r.end.to_string()]
                    }),
                );
                out.push_str("## Region synonyms\n\n");
                table(
                    &mut out,
                    &["term", "region"],
                    synonyms.iter().map(|s| vec![s.term.clone(), s.targets.join(";")]),
                );
            }
            SkillContent::ResearchContexts { contexts } => {
                out.push_str("# Research contexts\n\n");
                table(
                    &mut out,
                    &["topic", "keywords", "regions", "analysis_type", "focus"],
                    contexts.iter().map(|c| {
                        vec![
                            c.topic.clone(),
                            c.keywords.join("; "),
                            c.regions.join(";"),
                            c.analysis_type.to_string(),
                            c.focus.to_string(),
                        ]
                    }),
                );
            }
            SkillContent::DataSources { sources, .. } => {
                out.push_str("# Data sources\n\n");
                table(
                    &mut out,
                    &["chromosome", "extraction"],
                    sources.iter().map(|s| vec![s.chromosome.to_string(), s.extraction.as_str().to_string()]),
                );
            }
            SkillContent::ComposerGuidelines => {}
        }
    }

    out.push_str("# Output schema\n\n```\n");
    out.push_str(SCHEMA);
    out.push_str("```\n\n");
    out.push_str(OUTPUT_RULES);
    out
}

/// The full extraction prompt for `query`.
pub fn build_prompt(query: &str, skills: &SkillSet) -> String {
    let mut out = build_preamble(skills);
    out.push_str("\n# Query\n\n");
    out.push_str(query.trim());
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::skills::{select_skillset, SkillConfig};

    #[test]
    fn prompt_is_deterministic_and_reflects_skills() {
        let lib = assets::skill_library();
        let s3 = select_skillset(SkillConfig::S3, &lib).unwrap();
        let s0 = select_skillset(SkillConfig::S0, &lib).unwrap();
        let a = build_prompt("Analyze BRCA1 in British", &s3);
        assert_eq!(a, build_prompt("Analyze BRCA1 in British", &s3));
        assert!(a.contains("| GBR |"));
        assert!(a.contains("| BRCA1 | 17 | 41196312 | 41277500 |"));
        assert!(a.contains("Later corrections in the conversation override earlier statements."));
        assert!(a.ends_with("# Query\n\nAnalyze BRCA1 in British\n"));
        let b = build_prompt("Analyze BRCA1 in British", &s0);
        assert!(!b.contains("| GBR |"));
        assert!(b.contains("analysis_type: single_population"));
    }
}
