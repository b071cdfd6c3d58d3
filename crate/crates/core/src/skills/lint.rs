use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse::read_markdown_dir, parse_skill, SkillContent, SkillDocument, SkillError, SkillKind};

/// A cross-document consistency problem. Findings are reports, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum LintFinding {
    /// A file in a library directory failed to parse.
    Parse { file: String, error: String },
    DuplicateDocumentId { id: String },
    DuplicateKind { kind: SkillKind },
    /// The same key defined by two documents.
    DuplicateKey { table: String, key: String },
    SynonymCollision { term: String, targets: Vec<String> },
    DanglingSynonymTarget { document: String, term: String, target: String },
    DanglingRegionReference { topic: String, region: String },
    MissingDataSource { chromosome: String, region: String },
}

impl fmt::Display for LintFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LintFinding::Parse { file, error } => write!(f, "{file}: {error}"),
            LintFinding::DuplicateDocumentId { id } => write!(f, "document id `{id}` used twice"),
            LintFinding::DuplicateKind { kind } => write!(f, "more than one `{kind}` document"),
            LintFinding::DuplicateKey { table, key } => {
                write!(f, "`{key}` defined in more than one `{table}` table")
            }
            LintFinding::SynonymCollision { term, targets } => {
                write!(f, "synonym `{term}` maps to conflicting targets: {}", targets.join(", "))
            }
            LintFinding::DanglingSynonymTarget {
                document,
                term,
                target,
            } => write!(f, "{document}: synonym `{term}` targets unknown `{target}`"),
            LintFinding::DanglingRegionReference { topic, region } => {
                write!(f, "context `{topic}` references unknown region `{region}`")
            }
            LintFinding::MissingDataSource { chromosome, region } => {
                write!(f, "region `{region}` is on chromosome {chromosome}, which has no data source")
            }
        }
    }
}

/// Checks a parsed library for cross-document problems.
pub fn lint_library(documents: &[SkillDocument]) -> Vec<LintFinding> {
    let mut findings = Vec::new();

    let mut ids = HashSet::new();
    let mut kinds = BTreeMap::<SkillKind, usize>::new();
    for d in documents {
        if !ids.insert(d.id.as_str()) {
            findings.push(LintFinding::DuplicateDocumentId { id: d.id.clone() });
        }
        *kinds.entry(d.kind).or_default() += 1;
    }
    for (kind, n) in kinds {
        if n > 1 {
            findings.push(LintFinding::DuplicateKind { kind });
        }
    }

    let mut codes = BTreeSet::new();
    let mut regions = BTreeMap::new();
    let mut sourced = BTreeSet::new();
    for d in documents {
        match &d.content {
            SkillContent::Populations { populations, .. } => {
                for p in populations {
                    if !codes.insert(p.code.clone()) {
                        findings.push(LintFinding::DuplicateKey {
                            table: "populations".into(),
                            key: p.code.clone(),
                        });
                    }
                }
            }
            SkillContent::GenomicRegions { regions: rs, .. } => {
                for r in rs {
                    if regions.insert(r.name.to_lowercase(), r.clone()).is_some() {
                        findings.push(LintFinding::DuplicateKey {
                            table: "regions".into(),
                            key: r.name.clone(),
                        });
                    }
                }
            }
            SkillContent::DataSources { sources, .. } => {
                for s in sources {
                    if !sourced.insert(s.chromosome) {
                        findings.push(LintFinding::DuplicateKey {
                            table: "data_sources".into(),
                            key: s.chromosome.to_string(),
                        });
                    }
                }
            }
            _ => {}
        }
    }

    // every synonym table shares one term space
    let mut terms = BTreeMap::<String, BTreeSet<Vec<String>>>::new();
    for d in documents {
        let (synonyms, population_targets) = match &d.content {
            SkillContent::Populations { synonyms, .. } => (synonyms, true),
            SkillContent::GenomicRegions { synonyms, .. } => (synonyms, false),
            _ => continue,
        };
        for s in synonyms {
            terms.entry(s.term.clone()).or_default().insert(s.targets.clone());
            for t in &s.targets {
                let known = if population_targets {
                    codes.contains(t)
                } else {
                    regions.contains_key(&t.to_lowercase())
                };
                if !known {
                    findings.push(LintFinding::DanglingSynonymTarget {
                        document: d.id.clone(),
                        term: s.term.clone(),
                        target: t.clone(),
                    });
                }
            }
        }
    }
    for (term, targets) in terms {
        if targets.len() > 1 {
            findings.push(LintFinding::SynonymCollision {
                term,
                targets: targets.into_iter().map(|t| t.join(";")).collect(),
            });
        }
    }

    for d in documents {
        if let SkillContent::ResearchContexts { contexts } = &d.content {
            for c in contexts {
                for r in &c.regions {
                    if !regions.contains_key(&r.to_lowercase()) {
                        findings.push(LintFinding::DanglingRegionReference {
                            topic: c.topic.clone(),
                            region: r.clone(),
                        });
                    }
                }
            }
        }
    }

    for r in regions.values() {
        if !sourced.contains(&r.chromosome) {
            findings.push(LintFinding::MissingDataSource {
                chromosome: r.chromosome.to_string(),
                region: r.name.clone(),
            });
        }
    }

    findings
}

/// Parses and lints every markdown file in `dir`; parse failures become findings.
pub fn lint_dir(dir: &Path) -> Result<Vec<LintFinding>, SkillError> {
    let mut docs = Vec::new();
    let mut findings = Vec::new();
    for (path, text) in read_markdown_dir(dir)? {
        match parse_skill(&text) {
            Ok(d) => docs.push(d),
            Err(e) => findings.push(LintFinding::Parse {
                file: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                error: e.to_string(),
            }),
        }
    }
    findings.extend(lint_library(&docs));
    Ok(findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    fn replace_in(kind: SkillKind, from: &str, to: &str) -> Vec<SkillDocument> {
        assets::skill_sources()
            .iter()
            .map(|(_, src)| {
                let doc = parse_skill(src).unwrap();
                if doc.kind == kind {
                    assert!(src.contains(from), "fixture lacks `{from}`");
                    parse_skill(&src.replace(from, to)).unwrap()
                } else {
                    doc
                }
            })
            .collect()
    }

    #[test]
    fn bundled_library_is_clean() {
        assert_eq!(lint_library(&assets::skill_library()), []);
    }

    #[test]
    fn synonym_collision_across_documents() {
        let docs = replace_in(SkillKind::GenomicRegions, "| mhc | HLA |", "| british | HLA |");
        let findings = lint_library(&docs);
        assert!(findings.iter().any(|f| matches!(f, LintFinding::SynonymCollision { term, .. } if term == "british")), "{findings:?}");
    }

    #[test]
    fn dangling_region_reference() {
        let docs = replace_in(SkillKind::ResearchContexts, "| CFTR |", "| XYZ1 |");
        assert_eq!(
            lint_library(&docs),
            [LintFinding::DanglingRegionReference {
                topic: "cystic fibrosis".into(),
                region: "XYZ1".into()
            }]
        );
    }

    #[test]
    fn dangling_synonym_target() {
        let docs = replace_in(SkillKind::Populations, "| finns | FIN |", "| finns | FNN |");
        assert!(matches!(
            lint_library(&docs).as_slice(),
            [LintFinding::DanglingSynonymTarget { target, .. }] if target == "FNN"
        ));
    }

    #[test]
    fn missing_data_source() {
        let docs: Vec<_> = assets::skill_sources()
            .iter()
            .map(|(_, src)| {
                let doc = parse_skill(src).unwrap();
                if doc.kind == SkillKind::DataSources {
                    let kept: Vec<_> = src.lines().filter(|l| !l.starts_with("| 22 |")).collect();
                    parse_skill(&kept.join("\n")).unwrap()
                } else {
                    doc
                }
            })
            .collect();
        assert_eq!(
            lint_library(&docs),
            [LintFinding::MissingDataSource {
                chromosome: "22".into(),
                region: "CYP2D6".into()
            }]
        );
    }

    #[test]
    fn duplicate_kind_and_id() {
        let mut docs = assets::skill_library();
        docs.push(docs[0].clone());
        let findings = lint_library(&docs);
        assert!(findings.contains(&LintFinding::DuplicateDocumentId { id: docs[0].id.clone() }));
        assert!(findings.contains(&LintFinding::DuplicateKind { kind: docs[0].kind }));
    }

    #[test]
    fn lint_dir_reports_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        for (name, src) in assets::skill_sources() {
            let src = if *name == "populations.md" {
                src.replace("| GBR | British in England and Scotland | EUR | 91 |", "| EUR | British | EUR | 91 |")
            } else {
                src.to_string()
            };
            std::fs::write(dir.path().join(name), src).unwrap();
        }
        let findings = lint_dir(dir.path()).unwrap();
        assert!(matches!(&findings[0], LintFinding::Parse { file, error } if file == "populations.md" && error.contains("duplicate key `EUR`")), "{findings:?}");
    }
}
