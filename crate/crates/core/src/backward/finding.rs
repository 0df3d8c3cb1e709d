//! Category detectors, findings and their log rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Evidence, EvidenceKind};
use crate::forward::{CallChain, Hop, SinkSite};
use crate::model::{ComponentKind, MethodSig};
use crate::vsink::{Category, VSinkEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    Potential,
    FilteredFalsePositive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub app: String,
    pub component: String,
    pub kind: ComponentKind,
    pub entry: MethodSig,
    pub chain: CallChain,
    pub sink: VSinkEntry,
    pub site: SinkSite,
    pub category: Category,
    pub evidence: Vec<Evidence>,
    pub verdict: Verdict,
    /// Ids of the filter patterns that demoted this finding.
    #[serde(default)]
    pub filtered_by: Vec<String>,
    /// The component hit its time budget; other findings may be missing.
    #[serde(default)]
    pub partial: bool,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Finding {
    pub fn header(&self) -> String {
        format!(
            "FINDING {} {} {} {} {}",
            self.category, self.app, self.component, self.entry, self.sink.signature
        )
    }

    /// Lines the guided filter matches against: evidence lines, then the sink.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.evidence.iter().map(|e| e.rendered.clone()).collect();
        out.push(format!("SINK:{}", self.sink.signature));
        out
    }

    fn sort_key(&self) -> (&str, &str, &MethodSig, &SinkSite, Category) {
        (&self.app, &self.component, &self.entry, &self.site, self.category)
    }
}

/// Whether evidence satisfies the detector for `category`.
pub fn detects(category: Category, evidence: &[Evidence]) -> bool {
    let has = |k| evidence.iter().any(|e| e.kind == k);
    match category {
        Category::Direct => true,
        Category::DirectByParam => has(EvidenceKind::ConstantValue) || has(EvidenceKind::InputDependence),
        Category::Input => has(EvidenceKind::InputDependence),
        Category::Public => has(EvidenceKind::VSourceDependence),
    }
}

/// Build a finding if the category's detector accepts the evidence.
#[allow(clippy::too_many_arguments)]
pub fn detect(
    app: &str,
    component: &str,
    kind: ComponentKind,
    chain: &CallChain,
    sink: &VSinkEntry,
    site: &SinkSite,
    evidence: Vec<Evidence>,
    notes: Vec<String>,
) -> Option<Finding> {
    let category = sink.category;
    let evidence = if category == Category::Direct { Vec::new() } else { evidence };
    detects(category, &evidence).then(|| Finding {
        app: app.to_string(),
        component: component.to_string(),
        kind,
        entry: chain.entry().clone(),
        chain: chain.clone(),
        sink: sink.clone(),
        site: site.clone(),
        category,
        evidence,
        verdict: Verdict::Potential,
        filtered_by: Vec::new(),
        partial: false,
        notes,
    })
}

pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub fn render_finding(f: &Finding) -> String {
    let mut s = f.header();
    s.push('\n');
    s.push_str("CHAIN:\n");
    for (i, step) in f.chain.steps.iter().enumerate() {
        let via = match &step.hop {
            None => " -> sink".to_string(),
            Some(Hop::Direct) => String::new(),
            Some(Hop::Modeled { object, .. }) => format!(" via {object}"),
        };
        let _ = writeln!(s, "  {i} {} @{} ({}){via}", step.method, step.call_site, step.call_string);
    }
    for e in &f.evidence {
        let _ = writeln!(s, "{}", e.rendered);
    }
    for n in &f.notes {
        let _ = writeln!(s, "NOTE:{n}");
    }
    if f.partial {
        s.push_str("NOTE:component timed out, results partial\n");
    }
    match f.verdict {
        Verdict::Potential => s.push_str("VERDICT Potential\n"),
        Verdict::FilteredFalsePositive => {
            let _ = writeln!(s, "VERDICT FilteredFalsePositive {}", f.filtered_by.join(","));
        }
    }
    s
}
