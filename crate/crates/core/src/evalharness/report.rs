use std::collections::BTreeMap;
use std::fmt::Write;
use std::str::FromStr;

use super::{AblationReport, Cell, ConfigReport, Tier, FIELDS};
use crate::skills::SkillConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" | "text" | "text-table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}` (table, csv, json)")),
        }
    }
}

const CSV_HEADER: &str = "extractor,config,tier,n,full_match,faults,analysis_type,populations,chromosomes,regions,focus";

fn pct(cell: Option<&Cell>, f: impl Fn(&Cell) -> f64) -> String {
    match cell {
        Some(c) if c.n > 0 => format!("{:.1}", f(c) * 100.0),
        _ => "-".into(),
    }
}

fn table(report: &AblationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Full-match accuracy (%) by tier, extractor {}", report.extractor);
    let _ = write!(out, "{:<10}", "Tier");
    for c in &report.configs {
        let _ = write!(out, "{:>8}", c.config.as_str());
    }
    out.push('\n');
    let rows = Tier::ALL.iter().map(|t| (t.as_str(), Some(*t))).chain([("Overall", None)]);
    for (label, tier) in rows {
        let _ = write!(out, "{label:<10}");
        for c in &report.configs {
            let cell = match tier {
                Some(t) => c.tiers.get(&t),
                None => Some(&c.overall),
            };
            let _ = write!(out, "{:>8}", pct(cell, Cell::accuracy));
        }
        out.push('\n');
    }
    out.push('\n');
    let _ = writeln!(out, "Per-field accuracy (%), all tiers");
    let _ = write!(out, "{:<14}", "Field");
    for c in &report.configs {
        let _ = write!(out, "{:>8}", c.config.as_str());
    }
    out.push('\n');
    for field in FIELDS {
        let _ = write!(out, "{field:<14}");
        for c in &report.configs {
            let _ = write!(out, "{:>8}", pct(Some(&c.overall), |cell| cell.field_accuracy(field)));
        }
        out.push('\n');
    }
    out
}

fn csv_row(out: &mut String, extractor: &str, config: SkillConfig, label: &str, cell: &Cell) {
    let _ = write!(out, "{extractor},{},{label},{},{},{}", config.as_str(), cell.n, cell.full_match_count, cell.faults);
    for f in FIELDS {
        let _ = write!(out, ",{}", cell.field_matches.get(f).copied().unwrap_or(0));
    }
    out.push('\n');
}

fn csv(report: &AblationReport) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for c in &report.configs {
        for (tier, cell) in &c.tiers {
            csv_row(&mut out, &report.extractor, c.config, tier.as_str(), cell);
        }
        csv_row(&mut out, &report.extractor, c.config, "Overall", &c.overall);
    }
    out
}

pub fn render_report(report: &AblationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => table(report),
        ReportFormat::Csv => csv(report),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("report csv line {line}: {reason}")]
pub struct ReportParseError {
    pub line: usize,
    pub reason: String,
}

/// Reads a report back from its CSV rendering.
pub fn parse_csv(text: &str) -> Result<AblationReport, ReportParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(ReportParseError {
                line: 1,
                reason: "unexpected header".into(),
            })
        }
    }
    let mut extractor = String::new();
    let mut configs: Vec<ConfigReport> = Vec::new();
    for (k, line) in lines {
        let err = |reason: String| ReportParseError { line: k + 1, reason };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 + FIELDS.len() {
            return Err(err(format!("expected {} columns", 6 + FIELDS.len())));
        }
        let num = |i: usize| cols[i].parse::<usize>().map_err(|e| err(format!("column {}: {e}", i + 1)));
        extractor = cols[0].to_string();
        let config: SkillConfig = cols[1].parse().map_err(|_| err(format!("unknown config `{}`", cols[1])))?;
        let mut cell = Cell {
            n: num(3)?,
            full_match_count: num(4)?,
            faults: num(5)?,
            field_matches: BTreeMap::new(),
        };
        for (i, f) in FIELDS.iter().enumerate() {
            cell.field_matches.insert(f.to_string(), num(6 + i)?);
        }
        if configs.last().is_none_or(|c| c.config != config) {
            configs.push(ConfigReport {
                config,
                tiers: BTreeMap::new(),
                overall: Cell::default(),
            });
        }
        let entry = configs.last_mut().expect("pushed above");
        if cols[2] == "Overall" {
            entry.overall = cell;
        } else {
            let tier: Tier = cols[2].parse().map_err(err)?;
            entry.tiers.insert(tier, cell);
        }
    }
    Ok(AblationReport { extractor, configs })
}
