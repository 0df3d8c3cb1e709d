//! Analyst-authored false-positive patterns applied to findings. Matching
//! findings are demoted, never removed.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backward::{Finding, Verdict};
use crate::vsink::Category;

/// Categories a pattern may apply to.
pub const FILTERABLE: [Category; 2] = [Category::DirectByParam, Category::Input];

#[derive(Debug, Clone)]
pub struct FilterPattern {
    pub id: String,
    pub applies_to: Vec<Category>,
    pub regex: Regex,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("pattern file line {line}: {msg}")]
pub struct PatternError {
    pub line: usize,
    pub msg: String,
}

/// Parse `id|categories|regex|note` lines. The regex may itself contain `|`;
/// the note is everything after the last one.
pub fn parse_patterns(text: &str) -> Result<Vec<FilterPattern>, PatternError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let err = |msg: String| PatternError { line, msg };
        let mut head = content.splitn(3, '|');
        let (Some(id), Some(cats), Some(rest)) = (head.next(), head.next(), head.next()) else {
            return Err(err("expected `id|categories|regex|note`".into()));
        };
        let (regex, note) = rest
            .rsplit_once('|')
            .ok_or_else(|| err("expected `id|categories|regex|note`".into()))?;
        if id.trim().is_empty() {
            return Err(err("empty pattern id".into()));
        }
        let mut applies_to = Vec::new();
        for c in cats.split(',').map(str::trim).filter(|c| !c.is_empty()) {
            let c: Category = c.parse().map_err(err)?;
            if !FILTERABLE.contains(&c) {
                return Err(err(format!("patterns cannot apply to {c}")));
            }
            if !applies_to.contains(&c) {
                applies_to.push(c);
            }
        }
        if applies_to.is_empty() {
            return Err(err("pattern applies to no category".into()));
        }
        let regex = Regex::new(regex).map_err(|e| err(e.to_string()))?;
        out.push(FilterPattern {
            id: id.trim().to_string(),
            applies_to,
            regex,
            note: note.trim().to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    /// Findings matched per pattern id, including patterns with no hits.
    pub hits: BTreeMap<String, usize>,
    pub demoted: usize,
    pub total: usize,
}

fn matching_ids(f: &Finding, patterns: &[FilterPattern]) -> Vec<String> {
    if !FILTERABLE.contains(&f.category) {
        return Vec::new();
    }
    let lines = f.lines();
    patterns
        .iter()
        .filter(|p| p.applies_to.contains(&f.category))
        .filter(|p| lines.iter().any(|l| p.regex.is_match(l)))
        .map(|p| p.id.clone())
        .collect()
}

/// Demote every finding matched by a pattern of its category.
pub fn apply_filters(findings: &mut [Finding], patterns: &[FilterPattern]) -> FilterStats {
    let mut stats = FilterStats {
        hits: patterns.iter().map(|p| (p.id.clone(), 0)).collect(),
        total: findings.len(),
        ..Default::default()
    };
    for f in findings.iter_mut() {
        let ids = matching_ids(f, patterns);
        for id in &ids {
            *stats.hits.entry(id.clone()).or_default() += 1;
            if !f.filtered_by.contains(id) {
                f.filtered_by.push(id.clone());
            }
        }
        if !f.filtered_by.is_empty() {
            f.verdict = Verdict::FilteredFalsePositive;
        }
        if f.verdict == Verdict::FilteredFalsePositive {
            stats.demoted += 1;
        }
    }
    stats
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogGroup {
    pub category: Category,
    pub sink: String,
    /// Evidence lines shared by every finding in the group.
    pub lines: Vec<String>,
    pub multiplicity: usize,
}

/// Unique evidence logs of filterable findings, grouped by category, sink and
/// evidence lines, sorted.
pub fn collect_unique_logs(findings: &[Finding]) -> Vec<LogGroup> {
    let mut groups: BTreeMap<(Category, String, Vec<String>), usize> = BTreeMap::new();
    for f in findings.iter().filter(|f| FILTERABLE.contains(&f.category)) {
        let lines = f.evidence.iter().map(|e| e.rendered.clone()).collect();
        *groups.entry((f.category, f.sink.signature.to_string(), lines)).or_default() += 1;
    }
    groups
        .into_iter()
        .map(|((category, sink, lines), multiplicity)| LogGroup {
            category,
            sink,
            lines,
            multiplicity,
        })
        .collect()
}
