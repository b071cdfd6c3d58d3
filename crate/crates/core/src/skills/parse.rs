use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use super::{
    normalize_term, DataSourceEntry, Extraction, PopulationEntry, ProseSection,
    RegionEntry, ResearchContextEntry, SkillContent, SkillDocument, SkillError, SkillKind,
    SynonymEntry, TransferEstimate,
};
use crate::genome::Chromosome;

const POPULATIONS: &[&str] = &["code", "name", "super_population", "sample_count"];
const POPULATION_SYNONYMS: &[&str] = &["term", "code"];
const REGIONS: &[&str] = &["name", "chromosome", "start", "end"];
const REGION_SYNONYMS: &[&str] = &["term", "name"];
const CONTEXTS: &[&str] = &["topic", "keywords", "regions", "analysis_type", "focus"];
const SOURCES: &[&str] = &[
    "chromosome",
    "url_template",
    "full_size_bytes",
    "total_rows",
    "extraction",
];
const TRANSFER_ESTIMATES: &[&str] = &["region", "est_bytes"];

struct RawTable {
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

struct FrontMatter {
    fields: BTreeMap<String, String>,
    body_start: usize,
}

/// Parses one Skill document from markdown source.
pub fn parse_skill(source: &str) -> Result<SkillDocument, SkillError> {
    let source = source.replace("\r\n", "\n");
    let lines: Vec<&str> = source.lines().collect();
    let front = front_matter(&lines)?;

    let field = |name: &str| -> Result<String, SkillError> {
        front
            .fields
            .get(name)
            .filter(|v| !v.is_empty())
            .cloned()
            .ok_or_else(|| SkillError::MissingFrontMatter(format!("missing `{name}`")))
    };
    let id = field("id")?;
    let kind_label = field("kind")?;
    let domain = field("domain")?;
    let version = field("version")?;
    if !is_semver(&version) {
        return Err(SkillError::MissingFrontMatter(format!(
            "version `{version}` is not a semantic version"
        )));
    }
    let kind: SkillKind = kind_label.parse()?;

    let tables = collect_tables(&lines, front.body_start)?;
    let prose = collect_prose(&lines, front.body_start);

    let content = match kind {
        SkillKind::Populations => {
            let populations = populations(required(&tables, kind, "populations", POPULATIONS)?)?;
            let synonyms = synonyms(
                required(&tables, kind, "population_synonyms", POPULATION_SYNONYMS)?,
                "population_synonyms",
            )?;
            SkillContent::Populations {
                populations,
                synonyms,
            }
        }
        SkillKind::GenomicRegions => {
            let regions = regions(required(&tables, kind, "regions", REGIONS)?)?;
            let synonyms = synonyms(
                required(&tables, kind, "region_synonyms", REGION_SYNONYMS)?,
                "region_synonyms",
            )?;
            SkillContent::GenomicRegions { regions, synonyms }
        }
        SkillKind::ResearchContexts => SkillContent::ResearchContexts {
            contexts: contexts(required(&tables, kind, "contexts", CONTEXTS)?)?,
        },
        SkillKind::DataSources => {
            let sources = sources(required(&tables, kind, "data_sources", SOURCES)?)?;
            let transfer_estimates = match find_table(&tables, TRANSFER_ESTIMATES) {
                Some(t) => transfer_estimates(t)?,
                None => Vec::new(),
            };
            SkillContent::DataSources {
                sources,
                transfer_estimates,
            }
        }
        SkillKind::ComposerGuidelines => SkillContent::ComposerGuidelines,
    };

    Ok(SkillDocument {
        id,
        domain,
        version,
        kind,
        content,
        prose,
        source,
    })
}

/// Parses every `*.md` file in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<SkillDocument>, SkillError> {
    let mut docs = Vec::new();
    for (path, text) in read_markdown_dir(dir)? {
        let doc = parse_skill(&text).map_err(|e| match e {
            SkillError::MalformedRow { line, reason } => SkillError::MalformedRow {
                line,
                reason: format!("{}: {reason}", path.display()),
            },
            other => other,
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub(crate) fn read_markdown_dir(
    dir: &Path,
) -> Result<Vec<(std::path::PathBuf, String)>, SkillError> {
    let io = |e: std::io::Error| SkillError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "md"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).map_err(|e| SkillError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })?;
            Ok((p, text))
        })
        .collect()
}

pub(crate) fn body_after_front_matter(source: &str) -> &str {
    let mut offset = 0;
    let mut seen = 0;
    for line in source.split_inclusive('\n') {
        offset += line.len();
        if line.trim_end() == "---" {
            seen += 1;
            if seen == 2 {
                return &source[offset..];
            }
        } else if seen == 0 && !line.trim().is_empty() {
            break;
        }
    }
    source
}

fn front_matter(lines: &[&str]) -> Result<FrontMatter, SkillError> {
    let mut i = 0;
    while i < lines.len() && lines[i].trim().is_empty() {
        i += 1;
    }
    if i >= lines.len() || lines[i].trim_end() != "---" {
        return Err(SkillError::MissingFrontMatter(
            "document must start with a `---` line".into(),
        ));
    }
    let mut fields = BTreeMap::new();
    for (j, line) in lines.iter().enumerate().skip(i + 1) {
        if line.trim_end() == "---" {
            return Ok(FrontMatter {
                fields,
                body_start: j + 1,
            });
        }
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| {
            SkillError::MissingFrontMatter(format!("line {}: expected `key: value`", j + 1))
        })?;
        fields.insert(
            key.trim().to_string(),
            value.trim().trim_matches('"').to_string(),
        );
    }
    Err(SkillError::MissingFrontMatter(
        "front matter is not closed by `---`".into(),
    ))
}

fn is_semver(v: &str) -> bool {
    let core = v.split(['-', '+']).next().unwrap_or("");
    let parts: Vec<_> = core.split('.').collect();
    parts.len() == 3
        && parts
            .iter()
            .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()))
}

fn split_cells(line: &str) -> Vec<String> {
    let t = line.trim();
    let t = t.strip_prefix('|').unwrap_or(t);
    let t = t.strip_suffix('|').unwrap_or(t);
    t.split('|').map(|c| c.trim().to_string()).collect()
}

fn is_separator(cells: &[String]) -> bool {
    !cells.is_empty()
        && cells.iter().all(|c| {
            !c.is_empty() && c.chars().all(|ch| matches!(ch, '-' | ':')) && c.contains('-')
        })
}

fn collect_tables(lines: &[&str], start: usize) -> Result<Vec<RawTable>, SkillError> {
    let mut tables = Vec::new();
    let mut i = start;
    let mut in_fence = false;
    while i < lines.len() {
        let line = lines[i].trim();
        if line.starts_with("```") {
            in_fence = !in_fence;
            i += 1;
            continue;
        }
        if in_fence || !line.starts_with('|') {
            i += 1;
            continue;
        }
        let header: Vec<String> = split_cells(line)
            .into_iter()
            .map(|c| c.to_lowercase())
            .collect();
        let sep_ok = lines
            .get(i + 1)
            .map(|l| is_separator(&split_cells(l)))
            .unwrap_or(false);
        if !sep_ok {
            return Err(SkillError::MalformedRow {
                line: i + 2,
                reason: "table header must be followed by a `|---|` separator row".into(),
            });
        }
        let mut rows = Vec::new();
        let mut j = i + 2;
        while j < lines.len() && lines[j].trim().starts_with('|') {
            let cells = split_cells(lines[j]);
            if cells.len() != header.len() {
                return Err(SkillError::MalformedRow {
                    line: j + 1,
                    reason: format!(
                        "expected {} cells, found {}",
                        header.len(),
                        cells.len()
                    ),
                });
            }
            rows.push((j + 1, cells));
            j += 1;
        }
        tables.push(RawTable { header, rows });
        i = j;
    }
    Ok(tables)
}

fn collect_prose(lines: &[&str], start: usize) -> Vec<ProseSection> {
    let mut sections = Vec::new();
    let mut heading = String::new();
    let mut body: Vec<&str> = Vec::new();
    let mut flush = |heading: &str, body: &mut Vec<&str>| {
        let text = body.join("\n").trim().to_string();
        if !heading.is_empty() || !text.is_empty() {
            sections.push(ProseSection {
                heading: heading.to_string(),
                body: text,
            });
        }
        body.clear();
    };
    for line in &lines[start.min(lines.len())..] {
        if let Some(h) = line.strip_prefix("## ") {
            flush(&heading, &mut body);
            heading = h.trim().to_string();
        } else {
            body.push(line);
        }
    }
    flush(&heading, &mut body);
    sections
}

fn find_table<'a>(tables: &'a [RawTable], header: &[&str]) -> Option<&'a RawTable> {
    tables.iter().find(|t| t.header == header)
}

fn required<'a>(
    tables: &'a [RawTable],
    kind: SkillKind,
    name: &'static str,
    header: &[&str],
) -> Result<&'a RawTable, SkillError> {
    find_table(tables, header).ok_or(SkillError::MissingRequiredTable { kind, table: name })
}

fn malformed(line: usize, reason: impl Into<String>) -> SkillError {
    SkillError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

fn parse_u64(line: usize, column: &str, value: &str) -> Result<u64, SkillError> {
    value
        .replace(['_', ','], "")
        .parse()
        .map_err(|_| malformed(line, format!("{column}: `{value}` is not a non-negative integer")))
}

fn parse_chromosome(line: usize, value: &str) -> Result<Chromosome, SkillError> {
    if value.to_ascii_lowercase().starts_with("chr") {
        return Err(malformed(line, format!("chromosome: use a bare label, not `{value}`")));
    }
    Chromosome::parse(value)
        .ok_or_else(|| malformed(line, format!("chromosome: `{value}` is not in 1..22, X, Y")))
}

fn is_population_code(s: &str) -> bool {
    s.len() == 3 && s.bytes().all(|b| b.is_ascii_uppercase())
}

fn populations(table: &RawTable) -> Result<Vec<PopulationEntry>, SkillError> {
    let mut out: Vec<PopulationEntry> = Vec::new();
    let mut seen = HashSet::new();
    for (line, cells) in &table.rows {
        let code = cells[0].clone();
        if !is_population_code(&code) {
            return Err(malformed(*line, format!("code `{code}` must match [A-Z]{{3}}")));
        }
        if !seen.insert(code.clone()) {
            return Err(SkillError::DuplicateKey {
                table: "populations",
                key: code,
            });
        }
        let super_population = cells[2].clone();
        if !is_population_code(&super_population) {
            return Err(malformed(
                *line,
                format!("super_population `{super_population}` must match [A-Z]{{3}}"),
            ));
        }
        if cells[1].is_empty() {
            return Err(malformed(*line, "name is empty"));
        }
        let sample_count = parse_u64(*line, "sample_count", &cells[3])?;
        out.push(PopulationEntry {
            code,
            name: cells[1].clone(),
            super_population,
            sample_count: u32::try_from(sample_count)
                .map_err(|_| malformed(*line, "sample_count out of range"))?,
        });
    }
    let supers: HashSet<&str> = out
        .iter()
        .filter(|p| p.is_super_population())
        .map(|p| p.code.as_str())
        .collect();
    for (entry, (line, _)) in out.iter().zip(&table.rows) {
        if !supers.contains(entry.super_population.as_str()) {
            return Err(malformed(
                *line,
                format!(
                    "super_population `{}` is not a super-population code",
                    entry.super_population
                ),
            ));
        }
    }
    Ok(out)
}

fn synonyms(table: &RawTable, name: &'static str) -> Result<Vec<SynonymEntry>, SkillError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line, cells) in &table.rows {
        let term = normalize_term(&cells[0]);
        if term.is_empty() {
            return Err(malformed(*line, "synonym term is empty"));
        }
        let targets: Vec<String> = cells[1]
            .split(';')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        if targets.is_empty() {
            return Err(malformed(*line, "synonym target is empty"));
        }
        if !seen.insert(term.clone()) {
            return Err(SkillError::DuplicateKey { table: name, key: term });
        }
        out.push(SynonymEntry { term, targets });
    }
    Ok(out)
}

fn regions(table: &RawTable) -> Result<Vec<RegionEntry>, SkillError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line, cells) in &table.rows {
        let name = cells[0].clone();
        if name.is_empty() {
            return Err(malformed(*line, "region name is empty"));
        }
        if !seen.insert(name.to_lowercase()) {
            return Err(SkillError::DuplicateKey {
                table: "regions",
                key: name,
            });
        }
        let chromosome = parse_chromosome(*line, &cells[1])?;
        let start = parse_u64(*line, "start", &cells[2])?;
        let end = parse_u64(*line, "end", &cells[3])?;
        if start < 1 {
            return Err(malformed(*line, "start must be >= 1"));
        }
        if end <= start {
            return Err(malformed(*line, "end must be greater than start"));
        }
        if end > chromosome.grch37_length() {
            return Err(malformed(
                *line,
                format!("end {end} exceeds the GRCh37 length of chromosome {chromosome}"),
            ));
        }
        out.push(RegionEntry {
            name,
            chromosome,
            start,
            end,
        });
    }
    Ok(out)
}

fn split_list(cell: &str) -> Vec<String> {
    cell.split(';')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn contexts(table: &RawTable) -> Result<Vec<ResearchContextEntry>, SkillError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line, cells) in &table.rows {
        let topic = cells[0].clone();
        if topic.is_empty() {
            return Err(malformed(*line, "topic is empty"));
        }
        if !seen.insert(topic.to_lowercase()) {
            return Err(SkillError::DuplicateKey {
                table: "contexts",
                key: topic,
            });
        }
        let keywords: Vec<String> = split_list(&cells[1])
            .into_iter()
            .map(|k| normalize_term(&k))
            .collect();
        if keywords.is_empty() {
            return Err(malformed(*line, "context needs at least one keyword"));
        }
        let regions = split_list(&cells[2]);
        let analysis_type = cells[3]
            .parse()
            .map_err(|_| malformed(*line, format!("unknown analysis_type `{}`", cells[3])))?;
        let focus = cells[4]
            .parse()
            .map_err(|_| malformed(*line, format!("unknown focus `{}`", cells[4])))?;
        out.push(ResearchContextEntry {
            topic,
            keywords,
            regions,
            analysis_type,
            focus,
        });
    }
    Ok(out)
}

fn sources(table: &RawTable) -> Result<Vec<DataSourceEntry>, SkillError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line, cells) in &table.rows {
        let chromosome = parse_chromosome(*line, &cells[0])?;
        if !seen.insert(chromosome) {
            return Err(SkillError::DuplicateKey {
                table: "data_sources",
                key: chromosome.to_string(),
            });
        }
        let url_template = cells[1].clone();
        if !url_template.contains("{chromosome}") {
            return Err(malformed(*line, "url_template lacks a `{chromosome}` placeholder"));
        }
        let full_size_bytes = parse_u64(*line, "full_size_bytes", &cells[2])?;
        let total_rows = parse_u64(*line, "total_rows", &cells[3])?;
        if full_size_bytes == 0 || total_rows == 0 {
            return Err(malformed(*line, "full_size_bytes and total_rows must be positive"));
        }
        let extraction = match cells[4].as_str() {
            "full_download" => Extraction::FullDownload,
            "region_extract" => Extraction::RegionExtract,
            other => return Err(malformed(*line, format!("unknown extraction `{other}`"))),
        };
        out.push(DataSourceEntry {
            chromosome,
            url_template,
            full_size_bytes,
            total_rows,
            extraction,
        });
    }
    Ok(out)
}

fn transfer_estimates(table: &RawTable) -> Result<Vec<TransferEstimate>, SkillError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line, cells) in &table.rows {
        let region = cells[0].clone();
        if !seen.insert(region.to_lowercase()) {
            return Err(SkillError::DuplicateKey {
                table: "transfer_estimates",
                key: region,
            });
        }
        let est_bytes = parse_u64(*line, "est_bytes", &cells[1])?;
        out.push(TransferEstimate { region, est_bytes });
    }
    Ok(out)
}
