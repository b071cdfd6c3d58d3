//! Expert-authored markdown Skill documents.
//!
//! A Skill is a markdown file with a `---` delimited front matter block
//! (`id`, `kind`, `domain`, `version`) followed by H2 sections. Typed
//! knowledge lives in pipe tables whose headers are fixed per kind:
//!
//! | kind                  | required tables                                                    |
//! |-----------------------|--------------------------------------------------------------------|
//! | `populations`         | `code, name, super_population, sample_count` and `term, code`      |
//! | `genomic_regions`     | `name, chromosome, start, end` and `term, name`                    |
//! | `research_contexts`   | `topic, keywords, regions, analysis_type, focus`                   |
//! | `data_sources`        | `chromosome, url_template, full_size_bytes, total_rows, extraction`|
//! | `composer_guidelines` | none (prose only)                                                  |
//!
//! `data_sources` documents may also carry an optional `region, est_bytes`
//! table of measured transfer sizes for named regions.

mod lint;
mod parse;
mod set;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::genome::Chromosome;
use crate::intent::{AnalysisType, Focus};

pub use lint::{lint_dir, lint_library, LintFinding};
pub use parse::{load_dir, parse_skill};
pub use set::{select_skillset, SkillConfig, SkillSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SkillError {
    #[error("missing or malformed front matter: {0}")]
    MissingFrontMatter(String),
    #[error("unknown skill kind `{0}`")]
    UnknownKind(String),
    #[error("{kind} document is missing required table `{table}`")]
    MissingRequiredTable { kind: SkillKind, table: &'static str },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("duplicate key `{key}` in table `{table}`")]
    DuplicateKey { table: &'static str, key: String },
    #[error("configuration {config} requires a `{kind}` document")]
    MissingDocument { config: SkillConfig, kind: SkillKind },
    #[error("library holds more than one `{0}` document")]
    AmbiguousDocument(SkillKind),
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    Populations,
    GenomicRegions,
    ResearchContexts,
    DataSources,
    ComposerGuidelines,
}

impl SkillKind {
    pub const ALL: [SkillKind; 5] = [
        SkillKind::Populations,
        SkillKind::GenomicRegions,
        SkillKind::ResearchContexts,
        SkillKind::DataSources,
        SkillKind::ComposerGuidelines,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SkillKind::Populations => "populations",
            SkillKind::GenomicRegions => "genomic_regions",
            SkillKind::ResearchContexts => "research_contexts",
            SkillKind::DataSources => "data_sources",
            SkillKind::ComposerGuidelines => "composer_guidelines",
        }
    }
}

impl fmt::Display for SkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SkillKind {
    type Err = SkillError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SkillKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| SkillError::UnknownKind(s.trim().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationEntry {
    pub code: String,
    pub name: String,
    pub super_population: String,
    pub sample_count: u32,
}

impl PopulationEntry {
    pub fn is_super_population(&self) -> bool {
        self.code == self.super_population
    }
}

/// A normalized term and the code(s) or region name it resolves to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymEntry {
    pub term: String,
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub name: String,
    pub chromosome: Chromosome,
    pub start: u64,
    pub end: u64,
}

impl RegionEntry {
    pub fn build(&self) -> &'static str {
        crate::genome::BUILD
    }

    pub fn span(&self) -> u64 {
        self.end - self.start + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearchContextEntry {
    pub topic: String,
    pub keywords: Vec<String>,
    pub regions: Vec<String>,
    pub analysis_type: AnalysisType,
    pub focus: Focus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extraction {
    FullDownload,
    RegionExtract,
}

impl Extraction {
    pub fn as_str(self) -> &'static str {
        match self {
            Extraction::FullDownload => "full_download",
            Extraction::RegionExtract => "region_extract",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSourceEntry {
    pub chromosome: Chromosome,
    pub url_template: String,
    pub full_size_bytes: u64,
    pub total_rows: u64,
    pub extraction: Extraction,
}

impl DataSourceEntry {
    pub fn url(&self) -> String {
        self.url_template
            .replace("{chromosome}", self.chromosome.label())
    }

    /// Bytes per row as an exact ratio `full_size_bytes / total_rows`.
    pub fn bytes_per_row(&self) -> RowRatio {
        RowRatio {
            bytes: self.full_size_bytes,
            rows: self.total_rows,
        }
    }
}

/// An exact bytes-per-row ratio. Conversions round half up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRatio {
    pub bytes: u64,
    pub rows: u64,
}

impl RowRatio {
    pub fn bytes_for_rows(self, rows: u64) -> u64 {
        div_round_half_up(rows as u128 * self.bytes as u128, self.rows as u128)
    }

    pub fn rows_for_bytes(self, bytes: u64) -> u64 {
        div_round_half_up(bytes as u128 * self.rows as u128, self.bytes as u128)
    }

    pub fn as_f64(self) -> f64 {
        self.bytes as f64 / self.rows as f64
    }
}

pub(crate) fn div_round_half_up(num: u128, den: u128) -> u64 {
    ((num * 2 + den) / (den * 2)) as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferEstimate {
    pub region: String,
    pub est_bytes: u64,
}

/// Typed tables of a document, by kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SkillContent {
    Populations {
        populations: Vec<PopulationEntry>,
        synonyms: Vec<SynonymEntry>,
    },
    GenomicRegions {
        regions: Vec<RegionEntry>,
        synonyms: Vec<SynonymEntry>,
    },
    ResearchContexts {
        contexts: Vec<ResearchContextEntry>,
    },
    DataSources {
        sources: Vec<DataSourceEntry>,
        transfer_estimates: Vec<TransferEstimate>,
    },
    ComposerGuidelines,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProseSection {
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDocument {
    pub id: String,
    pub domain: String,
    pub version: String,
    pub kind: SkillKind,
    pub content: SkillContent,
    pub prose: Vec<ProseSection>,
    /// Source text with line endings normalized to `\n`.
    pub source: String,
}

impl SkillDocument {
    /// Markdown body after the front matter, as authored.
    pub fn body(&self) -> &str {
        parse::body_after_front_matter(&self.source)
    }
}

/// Lowercase, trim, collapse whitespace, then drop one trailing
/// "population(s)", "individuals" or "ancestry".
pub fn normalize_term(term: &str) -> String {
    let lowered = term.to_lowercase();
    let mut words: Vec<&str> = lowered.split_whitespace().collect();
    if words.len() > 1 {
        if let Some(last) = words.last() {
            if matches!(
                *last,
                "population" | "populations" | "individuals" | "ancestry"
            ) {
                words.pop();
            }
        }
    }
    words.join(" ")
}
