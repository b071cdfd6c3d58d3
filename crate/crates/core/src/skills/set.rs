use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    normalize_term, DataSourceEntry, PopulationEntry, RegionEntry, ResearchContextEntry,
    SkillContent, SkillDocument, SkillError, SkillKind,
};
use crate::genome::Chromosome;

/// Ablation configuration selecting which Skill kinds are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SkillConfig {
    S0,
    S1,
    S2,
    S3,
}

impl SkillConfig {
    pub const ALL: [SkillConfig; 4] = [SkillConfig::S0, SkillConfig::S1, SkillConfig::S2, SkillConfig::S3];

    pub fn kinds(self) -> &'static [SkillKind] {
        match self {
            SkillConfig::S0 => &[],
            SkillConfig::S1 => &[SkillKind::Populations, SkillKind::GenomicRegions],
            SkillConfig::S2 => &[SkillKind::ResearchContexts, SkillKind::DataSources],
            SkillConfig::S3 => &SkillKind::ALL,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SkillConfig::S0 => "S0",
            SkillConfig::S1 => "S1",
            SkillConfig::S2 => "S2",
            SkillConfig::S3 => "S3",
        }
    }
}

impl fmt::Display for SkillConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SkillConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SkillConfig::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown skill configuration `{s}` (expected S0..S3)"))
    }
}

/// The documents active under one configuration, with lookup indexes.
#[derive(Debug, Clone)]
pub struct SkillSet {
    config: SkillConfig,
    documents: Vec<Arc<SkillDocument>>,
    fingerprint: String,
    populations: BTreeMap<String, PopulationEntry>,
    population_terms: HashMap<String, Vec<String>>,
    regions: BTreeMap<String, RegionEntry>,
    region_terms: HashMap<String, String>,
    contexts: Vec<ResearchContextEntry>,
    sources: BTreeMap<Chromosome, DataSourceEntry>,
    transfer_estimates: HashMap<String, u64>,
}

/// Picks the documents for `config` out of `library`.
pub fn select_skillset(
    config: SkillConfig,
    library: &[SkillDocument],
) -> Result<SkillSet, SkillError> {
    let mut documents = Vec::new();
    for &kind in config.kinds() {
        let mut matching = library.iter().filter(|d| d.kind == kind);
        let doc = matching
            .next()
            .ok_or(SkillError::MissingDocument { config, kind })?;
        if matching.next().is_some() {
            return Err(SkillError::AmbiguousDocument(kind));
        }
        documents.push(Arc::new(doc.clone()));
    }
    Ok(SkillSet::from_documents(config, documents))
}

impl SkillSet {
    fn from_documents(config: SkillConfig, documents: Vec<Arc<SkillDocument>>) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"intent2dag-skillset-v1\n");
        hasher.update(config.as_str().as_bytes());
        hasher.update(b"\n");
        for d in &documents {
            for part in [d.kind.as_str(), d.id.as_str(), d.version.as_str()] {
                hasher.update(part.as_bytes());
                hasher.update([0u8]);
            }
            hasher.update((d.source.len() as u64).to_be_bytes());
            hasher.update(d.source.as_bytes());
        }
        let fingerprint = hex::encode(hasher.finalize());

        let mut set = SkillSet {
            config,
            documents: Vec::new(),
            fingerprint,
            populations: BTreeMap::new(),
            population_terms: HashMap::new(),
            regions: BTreeMap::new(),
            region_terms: HashMap::new(),
            contexts: Vec::new(),
            sources: BTreeMap::new(),
            transfer_estimates: HashMap::new(),
        };
        for d in &documents {
            match &d.content {
                SkillContent::Populations {
                    populations,
                    synonyms,
                } => {
                    for p in populations {
                        set.population_terms
                            .entry(normalize_term(&p.name))
                            .or_insert_with(|| vec![p.code.clone()]);
                        set.populations.insert(p.code.clone(), p.clone());
                    }
                    for s in synonyms {
                        set.population_terms.insert(s.term.clone(), s.targets.clone());
                    }
                }
                SkillContent::GenomicRegions { regions, synonyms } => {
                    for r in regions {
                        set.region_terms.insert(normalize_term(&r.name), r.name.clone());
                        set.regions.insert(r.name.clone(), r.clone());
                    }
                    for s in synonyms {
                        if let Some(t) = s.targets.first() {
                            set.region_terms.insert(s.term.clone(), t.clone());
                        }
                    }
                }
                SkillContent::ResearchContexts { contexts } => set.contexts.extend(contexts.iter().cloned()),
                SkillContent::DataSources {
                    sources,
                    transfer_estimates,
                } => {
                    for s in sources {
                        set.sources.insert(s.chromosome, s.clone());
                    }
                    for e in transfer_estimates {
                        set.transfer_estimates.insert(e.region.to_lowercase(), e.est_bytes);
                    }
                }
                SkillContent::ComposerGuidelines => {}
            }
        }
        set.documents = documents;
        set
    }

    pub fn config(&self) -> SkillConfig {
        self.config
    }

    pub fn documents(&self) -> &[Arc<SkillDocument>] {
        &self.documents
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn has(&self, kind: SkillKind) -> bool {
        self.documents.iter().any(|d| d.kind == kind)
    }

    pub fn document(&self, kind: SkillKind) -> Option<&SkillDocument> {
        self.documents.iter().find(|d| d.kind == kind).map(|d| d.as_ref())
    }

    /// `(id, version)` of each active document.
    pub fn versions(&self) -> Vec<(String, String)> {
        self.documents
            .iter()
            .map(|d| (d.id.clone(), d.version.clone()))
            .collect()
    }

    pub fn population(&self, code: &str) -> Option<&PopulationEntry> {
        self.populations.get(code)
    }

    pub fn populations(&self) -> impl Iterator<Item = &PopulationEntry> {
        self.populations.values()
    }

    pub fn region(&self, name: &str) -> Option<&RegionEntry> {
        self.regions.get(name)
    }

    pub fn regions(&self) -> impl Iterator<Item = &RegionEntry> {
        self.regions.values()
    }

    pub fn contexts(&self) -> &[ResearchContextEntry] {
        &self.contexts
    }

    pub fn data_source(&self, chromosome: Chromosome) -> Option<&DataSourceEntry> {
        self.sources.get(&chromosome)
    }

    pub fn transfer_estimate(&self, region: &str) -> Option<u64> {
        self.transfer_estimates.get(&region.to_lowercase()).copied()
    }

    /// Normalized terms known to the population vocabulary (synonyms and names).
    pub fn population_terms(&self) -> impl Iterator<Item = &str> {
        self.population_terms.keys().map(String::as_str)
    }

    /// Normalized terms known to the region vocabulary (names and synonyms).
    pub fn region_terms(&self) -> impl Iterator<Item = &str> {
        self.region_terms.keys().map(String::as_str)
    }

    /// Resolves a population term to codes. An empty result is a miss.
    pub fn resolve_population(&self, term: &str) -> Vec<String> {
        if self.populations.is_empty() {
            return Vec::new();
        }
        let trimmed = term.trim();
        let upper = trimmed.to_ascii_uppercase();
        if self.populations.contains_key(&upper) {
            return vec![upper];
        }
        self.population_terms
            .get(&normalize_term(trimmed))
            .cloned()
            .unwrap_or_default()
    }

    /// Resolves a region name or synonym.
    pub fn resolve_region(&self, term: &str) -> Option<&RegionEntry> {
        let name = self.region_terms.get(&normalize_term(term))?;
        self.regions.get(name)
    }

    /// Contexts whose keywords occur in the normalized query, ordered by
    /// longest matched keyword, then topic.
    pub fn resolve_context(&self, query: &str) -> Vec<&ResearchContextEntry> {
        let text = query.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
        let mut hits: Vec<(usize, &ResearchContextEntry)> = self
            .contexts
            .iter()
            .filter_map(|c| {
                c.keywords
                    .iter()
                    .filter(|k| text.contains(k.as_str()))
                    .map(|k| k.len())
                    .max()
                    .map(|len| (len, c))
            })
            .collect();
        hits.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.topic.cmp(&b.1.topic)));
        hits.into_iter().map(|(_, c)| c).collect()
    }
}
