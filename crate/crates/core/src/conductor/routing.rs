use std::collections::{BTreeMap, BTreeSet};

use crate::skills::{SkillContent, SkillDocument};

/// Words that place a query in the genomics domain regardless of vocabulary.
const GENOMICS_KEYWORDS: &[&str] = &[
    "allele", "alleles", "ancestry", "chr", "chromosome", "chromosomes", "gene", "genes", "genetic",
    "genetics", "genome", "genomes", "genomic", "genomics", "haplotype", "haplotypes", "loci", "locus",
    "mutation", "mutations", "polymorphism", "polymorphisms", "population", "populations", "region",
    "snp", "snps", "variant", "variants", "variation", "vcf",
];

/// Keyword rules per registered domain.
#[derive(Debug, Clone, Default)]
pub struct Router {
    domains: BTreeMap<String, BTreeSet<String>>,
}

fn words(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' { c } else { ' ' })
        .collect();
    let joined = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    format!(" {joined} ")
}

impl Router {
    /// One domain per distinct document `domain`, keyed by the vocabulary of its documents.
    pub fn from_library(library: &[SkillDocument]) -> Self {
        let mut domains: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for doc in library {
            let terms = domains.entry(doc.domain.clone()).or_default();
            if doc.domain == "1000-genomes" {
                terms.extend(GENOMICS_KEYWORDS.iter().map(|k| k.to_string()));
            }
            let mut add = |t: &str| {
                let w = words(t);
                if !w.trim().is_empty() {
                    terms.insert(w.trim().to_string());
                }
            };
            match &doc.content {
                SkillContent::Populations { populations, synonyms } => {
                    for p in populations {
                        add(&p.code);
                        add(&p.name);
                    }
                    synonyms.iter().for_each(|s| add(&s.term));
                }
                SkillContent::GenomicRegions { regions, synonyms } => {
                    regions.iter().for_each(|r| add(&r.name));
                    synonyms.iter().for_each(|s| add(&s.term));
                }
                SkillContent::ResearchContexts { contexts } => {
                    for c in contexts {
                        add(&c.topic);
                        c.keywords.iter().for_each(|k| add(k));
                    }
                }
                SkillContent::DataSources { .. } | SkillContent::ComposerGuidelines => {}
            }
        }
        Router { domains }
    }

    /// The first domain (by name) with a keyword in `query`.
    pub fn route(&self, query: &str) -> Option<&str> {
        let text = words(query);
        self.domains
            .iter()
            .find(|(_, terms)| terms.iter().any(|t| text.contains(&format!(" {t} "))))
            .map(|(d, _)| d.as_str())
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.domains.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    #[test]
    fn routes_bundled_domain() {
        let r = Router::from_library(&assets::skill_library());
        assert_eq!(r.domains().collect::<Vec<_>>(), ["1000-genomes"]);
        for q in [
            "Compare HLA and BRCA1 variants in European, African, and East Asian populations",
            "Analyze EAS",
            "Look at BRCA1",
            "Investigate cystic fibrosis",
            "Check TP53 for mutations",
        ] {
            assert_eq!(r.route(q), Some("1000-genomes"), "{q}");
        }
        assert_eq!(r.route("forecast tomorrow's weather"), None);
        assert_eq!(r.route(""), None);
    }

    #[test]
    fn aggregates_data_queries() {
        let r = Router::from_library(&assets::skill_library());
        for line in assets::QUERIES_JSONL.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let q = v["query"].as_str().unwrap();
            assert!(r.route(q).is_some(), "{q}");
        }
    }
}
