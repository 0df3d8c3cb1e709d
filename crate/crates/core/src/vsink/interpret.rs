//! Apply classification rules to restored mapping entries.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::restore::RestoredEntry;
use super::rules::{ClassificationRule, Metric, Tag};
use super::{VSinkEntry, VSourceEntry};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTrace {
    pub signature: String,
    /// Priorities tried, in order, up to and including the hit.
    pub consulted: Vec<i64>,
    pub hit: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub sinks: Vec<VSinkEntry>,
    pub sources: Vec<VSourceEntry>,
    pub deleted: Vec<RestoredEntry>,
    pub untagged: Vec<RestoredEntry>,
    pub trace: Vec<RuleTrace>,
}

fn rule_matches(rule: &ClassificationRule, e: &RestoredEntry) -> bool {
    let sig = &e.signature;
    let m = |v: &str| rule.action.matches(v, &rule.pattern);
    match rule.metric {
        Metric::Permission => e.first_permission().is_some_and(m),
        Metric::ApiName => m(&sig.method_name),
        Metric::ClassName => m(&sig.class_name),
        Metric::ParamType => sig.param_types.iter().any(|p| m(p)),
        Metric::ReturnType => m(&sig.return_type),
    }
}

/// Tag each entry with the first matching rule. `rules` must be in priority
/// order, as returned by `parse_rules`. Repeated signatures keep their first
/// classification.
pub fn interpret(rules: &[ClassificationRule], entries: &[RestoredEntry]) -> Classification {
    let mut out = Classification::default();
    let mut seen = HashSet::new();
    for e in entries {
        if !seen.insert(e.signature.clone()) {
            continue;
        }
        let mut consulted = Vec::new();
        let mut hit = None;
        for r in rules {
            consulted.push(r.priority);
            if rule_matches(r, e) {
                hit = Some(r);
                break;
            }
        }
        out.trace.push(RuleTrace {
            signature: e.signature.to_string(),
            consulted,
            hit: hit.map(|r| r.priority),
        });
        match hit.map(|r| (r.tag, r.priority)) {
            Some((Tag::Sink(category), p)) => out.sinks.push(VSinkEntry {
                signature: e.signature.clone(),
                category,
                origin_rule: Some(p),
                permissions: e.permissions.clone(),
            }),
            Some((Tag::VSource, _)) => out.sources.push(VSourceEntry {
                signature: e.signature.clone(),
                permissions: e.permissions.clone(),
            }),
            Some((Tag::Delete, _)) => out.deleted.push(e.clone()),
            None => out.untagged.push(e.clone()),
        }
    }
    out
}

/// `TAG|signature` lines, sorted; untagged entries use `Untagged`.
pub fn render_classification(c: &Classification) -> String {
    let mut lines: Vec<String> = Vec::new();
    lines.extend(c.sinks.iter().map(|s| format!("{}|{}", s.category, s.signature)));
    lines.extend(c.sources.iter().map(|s| format!("{}|{}", Tag::VSource, s.signature)));
    lines.extend(c.deleted.iter().map(|s| format!("{}|{}", Tag::Delete, s.signature)));
    lines.extend(c.untagged.iter().map(|s| format!("Untagged|{}", s.signature)));
    lines.sort();
    lines.iter().map(|l| format!("{l}\n")).collect()
}
