//! Bundled Skill documents, fixture dataset and query dataset.

use crate::skills::{parse_skill, SkillDocument};

pub const POPULATIONS_MD: &str = include_str!("../../../skills/populations.md");
pub const GENOMIC_REGIONS_MD: &str = include_str!("../../../skills/genomic_regions.md");
pub const RESEARCH_CONTEXTS_MD: &str = include_str!("../../../skills/research_contexts.md");
pub const DATA_SOURCES_MD: &str = include_str!("../../../skills/data_sources.md");
pub const COMPOSER_GUIDELINES_MD: &str = include_str!("../../../skills/composer_guidelines.md");

pub const FIXTURE_JSON: &str = include_str!("../../../fixtures/1000g_phase3.json");
pub const QUERIES_JSONL: &str = include_str!("../../../data/queries.jsonl");

/// `(file name, source)` of the five bundled Skill documents.
pub fn skill_sources() -> &'static [(&'static str, &'static str)] {
    &[
        ("composer_guidelines.md", COMPOSER_GUIDELINES_MD),
        ("data_sources.md", DATA_SOURCES_MD),
        ("genomic_regions.md", GENOMIC_REGIONS_MD),
        ("populations.md", POPULATIONS_MD),
        ("research_contexts.md", RESEARCH_CONTEXTS_MD),
    ]
}

/// The bundled library, parsed. Panics only if a bundled file is broken,
/// which the test suite rules out.
pub fn skill_library() -> Vec<SkillDocument> {
    skill_sources()
        .iter()
        .map(|(name, src)| parse_skill(src).unwrap_or_else(|e| panic!("bundled {name}: {e}")))
        .collect()
}
