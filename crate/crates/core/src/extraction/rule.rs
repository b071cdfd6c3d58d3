//! Deterministic lexical extractor.
//!
//! Tokens are matched longest-first against the population and region
//! vocabularies of the active SkillSet; chromosome mentions follow a small
//! grammar ("chromosome 21", "chromosomes 13 and 17", "chr1-5",
//! "chromosomes 1 through 5"). Research-context keywords contribute regions,
//! analysis type and focus. Text after [`CORRECTION_SEPARATOR`] is scanned as
//! a separate segment whose statements replace earlier ones field by field.

use std::collections::BTreeSet;
use std::time::Instant;

use super::{
    ClarificationRequest, ExtractionResult, MissingField, Outcome, RejectionNotice,
    CORRECTION_SEPARATOR,
};
use crate::genome::Chromosome;
use crate::intent::{validate_intent, AnalysisType, Focus, GenomicRegion, ResearchIntent};
use crate::skills::{ResearchContextEntry, SkillSet};

const MAX_PHRASE: usize = 6;

const COMPARATIVE_CUES: &[&str] = &[
    "compare",
    "compared",
    "comparing",
    "comparison",
    "comparisons",
    "contrast",
    "contrasting",
    "versus",
    "vs",
    "vs.",
    "between",
    "across",
    "difference",
    "differences",
    "differ",
    "differentiate",
];

const EXCLUSION_CUES: &[&[&str]] = &[
    &["instead", "of"],
    &["rather", "than"],
    &["excluding"],
    &["except"],
    &["not", "including"],
];

/// All-caps words that are vocabulary of the field, not region or population names.
const GENERIC_ACRONYMS: &[&str] = &[
    "DNA", "RNA", "SNP", "SNPS", "SNV", "SNVS", "VCF", "VCFS", "GWAS", "CNV", "CNVS", "ID", "IDS",
    "LD", "MAF", "QC", "PCA", "HWE", "FST", "UK", "US", "USA", "GRCH37", "GRCH38", "HG19", "HG38",
    "I", "A", "OK", "AND", "OR", "THE",
];

const POPULATION_SUFFIXES: &[&str] = &[
    "population",
    "populations",
    "individuals",
    "people",
    "peoples",
    "ancestry",
    "samples",
    "cohort",
    "cohorts",
    "groups",
];

const LOCUS_SUFFIXES: &[&str] = &["gene", "genes", "region", "locus", "loci"];

const STOPWORDS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "of", "in", "for", "and", "or", "with",
    "on", "at", "to", "all", "any", "some", "each", "my", "our", "their", "its",
];

#[derive(Debug, Clone)]
struct Token {
    text: String,
    norm: String,
    /// A `,`, `;`, `:` or sentence end follows the token.
    clause_break: bool,
    sentence_end: bool,
    sentence_initial: bool,
    excluded: bool,
    consumed: bool,
}

impl Token {
    fn is_capitalized(&self) -> bool {
        self.text.chars().next().is_some_and(char::is_uppercase)
    }

    fn is_all_caps_symbol(&self) -> bool {
        let t = self.text.trim_end_matches("'s");
        t.len() >= 2
            && t.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '-')
            && t.chars().filter(|c| c.is_ascii_uppercase()).count() >= 2
    }
}

fn tokenize(segment: &str) -> Vec<Token> {
    let mut tokens: Vec<Token> = Vec::new();
    for raw in segment.split_whitespace() {
        let trimmed_start = raw.trim_start_matches(|c: char| "\"'(“‘[".contains(c));
        let core = trimmed_start.trim_end_matches(|c: char| ".,;:!?)\"'”’]".contains(c));
        let tail = &trimmed_start[core.len()..];
        if core.is_empty() {
            if let Some(last) = tokens.last_mut() {
                last.clause_break |= tail.chars().any(|c| ",;:.!?".contains(c));
                last.sentence_end |= tail.chars().any(|c| ".!?".contains(c));
            }
            continue;
        }
        let sentence_initial = tokens.last().is_none_or(|t| t.sentence_end);
        tokens.push(Token {
            text: core.to_string(),
            norm: core.to_lowercase(),
            clause_break: tail.chars().any(|c| ",;:.!?".contains(c)),
            sentence_end: tail.chars().any(|c| ".!?".contains(c)),
            sentence_initial,
            excluded: false,
            consumed: false,
        });
    }
    mark_exclusions(&mut tokens);
    tokens
}

fn mark_exclusions(tokens: &mut [Token]) {
    let mut i = 0;
    while i < tokens.len() {
        let cue = EXCLUSION_CUES.iter().find(|cue| {
            cue.iter()
                .enumerate()
                .all(|(k, w)| tokens.get(i + k).is_some_and(|t| t.norm == *w))
        });
        match cue {
            Some(cue) => {
                for k in 0..cue.len() {
                    tokens[i + k].consumed = true;
                }
                let mut j = i + cue.len();
                while j < tokens.len() {
                    tokens[j].excluded = true;
                    if tokens[j].clause_break {
                        break;
                    }
                    j += 1;
                }
                i = j + 1;
            }
            None => i += 1,
        }
    }
}

#[derive(Debug, Default)]
struct Scan<'a> {
    populations: BTreeSet<String>,
    /// Populations named after an exclusion cue ("instead of Europeans").
    excluded_populations: BTreeSet<String>,
    regions: Vec<GenomicRegion>,
    chromosomes: BTreeSet<Chromosome>,
    contexts: Vec<&'a ResearchContextEntry>,
    focus: Option<Focus>,
    comparative: bool,
    unresolved: Vec<String>,
}

impl Scan<'_> {
    fn has_locus(&self) -> bool {
        !self.regions.is_empty() || !self.chromosomes.is_empty()
    }
}

fn chromosome_label(token: &str) -> Option<&str> {
    let t = token.strip_prefix("chr").unwrap_or(token);
    (!t.is_empty()
        && (t.bytes().all(|b| b.is_ascii_digit()) || t.eq_ignore_ascii_case("x") || t.eq_ignore_ascii_case("y")))
    .then_some(t)
}

fn chromosome_range(a: Chromosome, b: Chromosome) -> Vec<Chromosome> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    Chromosome::all().filter(|c| *c >= lo && *c <= hi).collect()
}

/// Parses one label or `a-b` range; invalid labels are reported as terms.
fn parse_label_item(text: &str, out: &mut Vec<Chromosome>, bad: &mut Vec<String>) -> bool {
    if let Some((a, b)) = text.split_once('-') {
        match (chromosome_label(a), chromosome_label(b)) {
            (Some(a), Some(b)) => match (Chromosome::parse(a), Chromosome::parse(b)) {
                (Some(a), Some(b)) => out.extend(chromosome_range(a, b)),
                _ => bad.push(format!("chromosome {text}")),
            },
            _ => return false,
        }
        return true;
    }
    match chromosome_label(text) {
        Some(l) => {
            match Chromosome::parse(l) {
                Some(c) => out.push(c),
                None => bad.push(format!("chromosome {l}")),
            }
            true
        }
        None => false,
    }
}

fn scan_chromosomes(tokens: &mut [Token], scan: &mut Scan<'_>) {
    let mut i = 0;
    while i < tokens.len() {
        let norm = tokens[i].norm.clone();
        let keyword = matches!(norm.as_str(), "chromosome" | "chromosomes" | "chr" | "chrom");
        let fused = !keyword && norm.starts_with("chr") && !norm.starts_with("chrom");
        if !keyword && !fused {
            i += 1;
            continue;
        }
        let mut found = Vec::new();
        let mut bad = Vec::new();
        let mut j = if fused { i } else { i + 1 };
        let first_ok = tokens
            .get(j)
            .is_some_and(|t| !t.consumed && parse_label_item(&t.norm, &mut found, &mut bad));
        if !first_ok {
            i += 1;
            continue;
        }
        let start = i;
        loop {
            let cur = &tokens[j];
            let next = j + 1;
            if cur.clause_break && !cur.sentence_end {
                // "1, 2, and 22" or "1, 2"
                let k = if tokens.get(next).is_some_and(|t| matches!(t.norm.as_str(), "and" | "or")) {
                    next + 1
                } else {
                    next
                };
                if tokens.get(k).is_some_and(|t| parse_label_item(&t.norm, &mut found, &mut bad)) {
                    j = k;
                    continue;
                }
                break;
            }
            if cur.clause_break {
                break;
            }
            match tokens.get(next).map(|t| t.norm.as_str()) {
                Some("and" | "&" | "or") => {
                    if tokens.get(next + 1).is_some_and(|t| parse_label_item(&t.norm, &mut found, &mut bad)) {
                        j = next + 1;
                        continue;
                    }
                }
                Some("through" | "to" | "thru" | "-") => {
                    let lo = found.last().copied();
                    let mut upper = Vec::new();
                    if let (Some(lo), Some(t)) = (lo, tokens.get(next + 1)) {
                        if parse_label_item(&t.norm, &mut upper, &mut bad) {
                            if let Some(hi) = upper.first() {
                                found.extend(chromosome_range(lo, *hi));
                            }
                            j = next + 1;
                            continue;
                        }
                    }
                }
                _ => {}
            }
            break;
        }
        let excluded = tokens[start..=j].iter().any(|t| t.excluded);
        for t in &mut tokens[start..=j] {
            t.consumed = true;
        }
        if !excluded {
            scan.chromosomes.extend(found);
            scan.unresolved.extend(bad);
        }
        i = j + 1;
    }
}

fn phrase(tokens: &[Token]) -> Option<String> {
    // a phrase may not span a clause break
    if tokens[..tokens.len() - 1].iter().any(|t| t.clause_break) || tokens.iter().any(|t| t.consumed) {
        return None;
    }
    Some(tokens.iter().map(|t| t.norm.as_str()).collect::<Vec<_>>().join(" "))
}

fn scan_vocabulary(tokens: &mut [Token], skills: &SkillSet, scan: &mut Scan<'_>) {
    let mut i = 0;
    while i < tokens.len() {
        let mut matched = 0;
        for n in (1..=MAX_PHRASE.min(tokens.len() - i)).rev() {
            let window = &tokens[i..i + n];
            let Some(text) = phrase(window) else { continue };
            let excluded = window.iter().any(|t| t.excluded);
            if let Some(region) = skills.resolve_region(&text) {
                if !excluded {
                    scan.regions.push(region.into());
                }
                matched = n;
                break;
            }
            // three-letter codes count only when written in capitals
            let code_like = n == 1 && window[0].text.len() == 3 && skills.population(&window[0].text.to_ascii_uppercase()).is_some();
            if code_like && window[0].text != window[0].text.to_ascii_uppercase() {
                continue;
            }
            let codes = skills.resolve_population(&text);
            if !codes.is_empty() {
                if excluded {
                    scan.excluded_populations.extend(codes);
                } else {
                    scan.populations.extend(codes);
                }
                matched = n;
                break;
            }
        }
        if matched > 0 {
            for t in &mut tokens[i..i + matched] {
                t.consumed = true;
            }
            i += matched;
        } else {
            i += 1;
        }
    }
}

fn scan_cues(tokens: &[Token], scan: &mut Scan<'_>) {
    for t in tokens.iter().filter(|t| !t.excluded) {
        if COMPARATIVE_CUES.contains(&t.norm.as_str()) {
            scan.comparative = true;
        }
        if scan.focus.is_none() {
            scan.focus = match t.norm.as_str() {
                "rare" => Some(Focus::Rare),
                "common" => Some(Focus::Common),
                "deleterious" | "damaging" | "pathogenic" | "harmful" | "loss-of-function" => {
                    Some(Focus::Deleterious)
                }
                _ => None,
            };
        }
    }
}

fn scan_unresolved(tokens: &[Token], scan: &mut Scan<'_>) {
    let open = |t: &Token| !t.consumed && !t.excluded;
    let mut terms: Vec<String> = Vec::new();

    for t in tokens.iter().filter(|t| open(t)) {
        let bare = t.text.trim_end_matches("'s");
        if t.is_all_caps_symbol() && !GENERIC_ACRONYMS.contains(&bare.to_ascii_uppercase().as_str()) {
            terms.push(bare.to_string());
        }
    }

    for (i, t) in tokens.iter().enumerate() {
        if LOCUS_SUFFIXES.contains(&t.norm.as_str()) && i > 0 {
            let prev = &tokens[i - 1];
            if open(prev) && !prev.clause_break && !STOPWORDS.contains(&prev.norm.as_str()) && !prev.norm.chars().all(|c| c.is_ascii_digit()) && (prev.is_capitalized() || prev.text.chars().any(|c| c.is_ascii_digit())) {
                terms.push(prev.text.trim_end_matches("'s").to_string());
            }
        }
        if POPULATION_SUFFIXES.contains(&t.norm.as_str()) {
            // walk back over "Cap[ Cap] (, | and | or) Cap ..." lists
            let mut j = i;
            let mut group: Vec<&str> = Vec::new();
            let mut found: Vec<String> = Vec::new();
            let flush = |group: &mut Vec<&str>, found: &mut Vec<String>| {
                if !group.is_empty() {
                    group.reverse();
                    found.push(group.join(" "));
                    group.clear();
                }
            };
            while j > 0 {
                let prev = &tokens[j - 1];
                if j < i && prev.sentence_end {
                    break;
                }
                if matches!(prev.norm.as_str(), "and" | "or" | "&") || prev.consumed {
                    flush(&mut group, &mut found);
                    j -= 1;
                    continue;
                }
                let starts_sentence = prev.sentence_initial;
                if prev.is_capitalized() && !prev.excluded && !prev.is_all_caps_symbol() && !starts_sentence {
                    if prev.clause_break && j < i {
                        flush(&mut group, &mut found);
                    }
                    group.push(prev.text.as_str());
                    j -= 1;
                    continue;
                }
                break;
            }
            if !group.is_empty() {
                group.reverse();
                found.push(group.join(" "));
            }
            found.reverse();
            terms.extend(found);
        }
    }

    for term in terms {
        if !scan.unresolved.iter().any(|u| u.eq_ignore_ascii_case(&term)) {
            scan.unresolved.push(term);
        }
    }
}

fn scan_segment<'a>(segment: &str, skills: &'a SkillSet) -> Scan<'a> {
    let mut tokens = tokenize(segment);
    let mut scan = Scan::default();
    scan_chromosomes(&mut tokens, &mut scan);
    scan_vocabulary(&mut tokens, skills, &mut scan);
    scan_cues(&tokens, &mut scan);
    let included: String = tokens
        .iter()
        .filter(|t| !t.excluded)
        .map(|t| t.norm.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    scan.contexts = skills.resolve_context(&included);
    for c in &scan.contexts {
        for name in &c.regions {
            if let Some(r) = skills.region(name) {
                scan.regions.push(r.into());
            }
        }
    }
    scan_unresolved(&tokens, &mut scan);
    scan
}

/// Extracts an intent from `query` using only the tables in `skills`.
/// Identical inputs always produce identical outcomes.
pub fn extract_rule(query: &str, skills: &SkillSet) -> ExtractionResult {
    let started = Instant::now();
    let outcome = extract_outcome(query, skills);
    ExtractionResult {
        outcome,
        skill_fingerprint: skills.fingerprint().to_string(),
        extractor_id: "rule".into(),
        elapsed_ms: started.elapsed().as_millis() as u64,
        token_cost: None,
    }
}

fn extract_outcome(query: &str, skills: &SkillSet) -> Outcome {
    let segments: Vec<Scan<'_>> = query
        .split(CORRECTION_SEPARATOR)
        .map(|s| scan_segment(s, skills))
        .collect();

    let mut unresolved: Vec<String> = Vec::new();
    for s in &segments {
        for u in &s.unresolved {
            if !unresolved.iter().any(|x| x.eq_ignore_ascii_case(u)) {
                unresolved.push(u.clone());
            }
        }
    }
    if !unresolved.is_empty() {
        return Outcome::Rejection(RejectionNotice {
            message: format!(
                "Could not map {} to any population, region or chromosome in the loaded Skills. Please rephrase using known names.",
                unresolved.iter().map(|u| format!("`{u}`")).collect::<Vec<_>>().join(", ")
            ),
            unresolved_terms: unresolved,
        });
    }

    // A later segment naming populations replaces the earlier set, unless it
    // says what it replaces ("British instead of Europeans"): then it substitutes.
    let mut populations: BTreeSet<String> = BTreeSet::new();
    for s in segments.iter().filter(|s| !s.populations.is_empty()) {
        if s.excluded_populations.is_empty() || populations.is_empty() {
            populations = s.populations.clone();
        } else {
            populations.retain(|p| !s.excluded_populations.contains(p));
            populations.extend(s.populations.iter().cloned());
        }
    }
    let locus = segments.iter().rev().find(|s| s.has_locus());
    let focus_cue = segments.iter().rev().find_map(|s| s.focus);
    let comparative = segments.iter().any(|s| s.comparative);
    let contexts: Vec<&ResearchContextEntry> = match locus {
        Some(s) => s.contexts.clone(),
        None => segments.iter().rev().find(|s| !s.contexts.is_empty()).map(|s| s.contexts.clone()).unwrap_or_default(),
    };

    let mut missing = Vec::new();
    if populations.is_empty() {
        missing.push(MissingField::Populations);
    }
    if locus.is_none() {
        missing.push(MissingField::ChromosomesOrRegions);
    }
    if !missing.is_empty() {
        return clarification(missing);
    }
    let locus = locus.expect("checked above");

    let n = populations.len();
    let analysis_type = if n >= 2 && comparative {
        AnalysisType::PopulationComparison
    } else if let Some(c) = contexts.iter().find(|c| c.analysis_type.admits(n)) {
        c.analysis_type
    } else if n == 1 {
        AnalysisType::SinglePopulation
    } else {
        AnalysisType::MultiPopulation
    };

    let focus = focus_cue.unwrap_or_else(|| {
        let distinct: BTreeSet<Focus> = contexts
            .iter()
            .map(|c| c.focus)
            .filter(|f| *f != Focus::AllVariants)
            .collect();
        if distinct.len() == 1 {
            *distinct.iter().next().expect("one element")
        } else {
            Focus::AllVariants
        }
    });

    let intent = ResearchIntent {
        analysis_type,
        populations: populations.into_iter().collect(),
        chromosomes: (!locus.chromosomes.is_empty()).then(|| locus.chromosomes.iter().copied().collect()),
        regions: (!locus.regions.is_empty()).then(|| locus.regions.clone()),
        focus,
    };
    match validate_intent(&intent, skills) {
        Ok(intent) => Outcome::Intent(intent),
        Err(violations) => Outcome::Clarification(ClarificationRequest {
            missing_fields: vec![MissingField::ChromosomesOrRegions],
            question: format!(
                "The request is inconsistent ({}). Which chromosomes or regions should be analyzed?",
                violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
            ),
        }),
    }
}

fn clarification(missing: Vec<MissingField>) -> Outcome {
    let question = missing
        .iter()
        .map(|m| match m {
            MissingField::Populations => {
                "Which populations should be analyzed? Use super-population codes such as EUR or AFR, or names such as British or Yoruba."
            }
            MissingField::ChromosomesOrRegions => {
                "Which chromosomes or genomic regions should be analyzed? For example chromosome 21, or a gene such as BRCA1."
            }
            MissingField::AnalysisType => "What kind of analysis should be run?",
        })
        .collect::<Vec<_>>()
        .join(" ");
    Outcome::Clarification(ClarificationRequest {
        missing_fields: missing,
        question,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::skills::{select_skillset, SkillConfig};

    fn skills(config: SkillConfig) -> SkillSet {
        select_skillset(config, &assets::skill_library()).unwrap()
    }

    fn intent(query: &str) -> ResearchIntent {
        match extract_rule(query, &skills(SkillConfig::S3)).outcome {
            Outcome::Intent(i) => i,
            other => panic!("{query}: {other:?}"),
        }
    }

    fn codes(i: &ResearchIntent) -> Vec<&str> {
        i.populations.iter().map(String::as_str).collect()
    }

    fn region_names(i: &ResearchIntent) -> Vec<&str> {
        i.regions.iter().flatten().map(|r| r.name.as_str()).collect()
    }

    #[test]
    fn hla_brca1_comparison() {
        let i = intent("Compare HLA and BRCA1 variants in European, African, and East Asian populations");
        assert_eq!(i.analysis_type, AnalysisType::PopulationComparison);
        assert_eq!(codes(&i), ["AFR", "EAS", "EUR"]);
        assert_eq!(i.chromosomes, None);
        assert_eq!(region_names(&i), ["HLA", "BRCA1"]);
        assert_eq!(i.focus, Focus::AllVariants);
    }

    #[test]
    fn brca_in_british_and_finnish() {
        let i = intent("Analyze BRCA2 and BRCA1 in British and Finnish populations");
        assert_eq!(i.analysis_type, AnalysisType::MultiPopulation);
        assert_eq!(codes(&i), ["FIN", "GBR"]);
        assert_eq!(region_names(&i), ["BRCA2", "BRCA1"]);
    }

    #[test]
    fn disease_contexts_across_super_populations() {
        let i = intent("Compare sickle cell, cystic fibrosis, and Alzheimer's variants across all five super-populations.");
        assert_eq!(i.analysis_type, AnalysisType::PopulationComparison);
        assert_eq!(codes(&i), ["AFR", "AMR", "EAS", "EUR", "SAS"]);
        assert_eq!(region_names(&i), ["CFTR", "HBB", "APOE"]);
    }

    #[test]
    fn pharmacogenomic_context() {
        let i = intent("Profile pharmacogenomic variation across South Asians ethnic groups");
        assert_eq!(i.analysis_type, AnalysisType::RegionAnalysis);
        assert_eq!(codes(&i), ["SAS"]);
        assert_eq!(region_names(&i), ["CYP2D6"]);
    }

    #[test]
    fn missing_populations_asks() {
        match extract_rule("Check TP53 for mutations", &skills(SkillConfig::S3)).outcome {
            Outcome::Clarification(c) => assert_eq!(c.missing_fields, [MissingField::Populations]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_gene_rejected() {
        match extract_rule("Study rare variants in the HBP gene for Mende and Esan populations", &skills(SkillConfig::S3)).outcome {
            Outcome::Rejection(r) => assert_eq!(r.unresolved_terms, ["HBP"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_population_name_rejected() {
        match extract_rule("Compare chromosome 21 in Martian and Yoruba populations", &skills(SkillConfig::S3)).outcome {
            Outcome::Rejection(r) => assert_eq!(r.unresolved_terms, ["Martian"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chromosome_grammar() {
        let chroms = |q: &str| intent(q).chromosomes.unwrap().iter().map(|c| c.to_string()).collect::<Vec<_>>();
        assert_eq!(chroms("Analyze chromosome 21 in EUR"), ["21"]);
        assert_eq!(chroms("Analyze chromosomes 13 and 17 in EUR"), ["13", "17"]);
        assert_eq!(chroms("Analyze chr1-3 in EUR"), ["1", "2", "3"]);
        assert_eq!(chroms("Analyze chromosomes 1 through 3 in EUR"), ["1", "2", "3"]);
        assert_eq!(chroms("Analyze chromosomes 1, 2, and 22 in EUR"), ["1", "2", "22"]);
        assert_eq!(chroms("Analyze chromosome X in EUR"), ["X"]);
    }

    #[test]
    fn invalid_chromosome_rejected() {
        match extract_rule("Analyze chromosome 25 in EUR", &skills(SkillConfig::S3)).outcome {
            Outcome::Rejection(r) => assert_eq!(r.unresolved_terms, ["chromosome 25"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lowercase_code_is_not_a_population() {
        match extract_rule("Look at chromosome 21 in the eur cohort", &skills(SkillConfig::S3)).outcome {
            Outcome::Clarification(c) => assert_eq!(c.missing_fields, [MissingField::Populations]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn focus_cues_and_single_population() {
        let i = intent("Find rare variants on chromosome 22 in Yoruba");
        assert_eq!(i.focus, Focus::Rare);
        assert_eq!(i.analysis_type, AnalysisType::SinglePopulation);
        assert_eq!(codes(&i), ["YRI"]);
    }

    #[test]
    fn context_focus_applies() {
        let i = intent("Study tumor suppressor variation in British individuals");
        assert_eq!(region_names(&i), ["TP53"]);
        assert_eq!(i.focus, Focus::Deleterious);
    }

    #[test]
    fn correction_replaces_fields() {
        let q = format!("Compare HLA in European and African populations{CORRECTION_SEPARATOR}use East Asian instead of African");
        let i = intent(&q);
        assert_eq!(codes(&i), ["EAS", "EUR"]);
        assert_eq!(region_names(&i), ["HLA"]);
        assert_eq!(i.analysis_type, AnalysisType::PopulationComparison);
        let q = format!("Compare HLA in European and African populations{CORRECTION_SEPARATOR}only East Asian");
        assert_eq!(codes(&intent(&q)), ["EAS"]);
        let q = format!("Check TP53 for mutations{CORRECTION_SEPARATOR}Finnish");
        let i = intent(&q);
        assert_eq!(codes(&i), ["FIN"]);
        assert_eq!(region_names(&i), ["TP53"]);
    }

    #[test]
    fn exclusion_clause_drops_terms() {
        let i = intent("Analyze BRCA1 in Finnish rather than British populations");
        assert_eq!(codes(&i), ["FIN"]);
    }

    #[test]
    fn without_skills_codes_are_unknown() {
        let s0 = skills(SkillConfig::S0);
        match extract_rule("Analyze chromosome 21 in British individuals", &s0).outcome {
            Outcome::Rejection(r) => assert_eq!(r.unresolved_terms, ["British"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let s = skills(SkillConfig::S3);
        let q = "Compare HLA and BRCA1 variants in European, African, and East Asian populations";
        assert_eq!(extract_rule(q, &s).outcome, extract_rule(q, &s).outcome);
    }
}
