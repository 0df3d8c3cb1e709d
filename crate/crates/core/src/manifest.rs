//! Exposed component determination.
//!
//! A component is exposed when it is enabled, it is exported (explicitly or
//! by platform default), and any permission guarding it has `normal`
//! protection level.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{AppBundle, ComponentDecl, ComponentKind, ProtectionLevel};

pub type PermissionLevels = BTreeMap<String, ProtectionLevel>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExposureReason {
    Disabled,
    ExplicitExported,
    ImplicitIntentFilter,
    ImplicitProviderDefault,
    NotExported,
    ProtectedByStrongPermission,
}

impl ExposureReason {
    pub fn implies_exposed(self) -> bool {
        matches!(
            self,
            ExposureReason::ExplicitExported
                | ExposureReason::ImplicitIntentFilter
                | ExposureReason::ImplicitProviderDefault
        )
    }
}

impl fmt::Display for ExposureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureVerdict {
    pub component: String,
    pub kind: ComponentKind,
    pub exposed: bool,
    pub reason: ExposureReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureOptions {
    /// Treat providers without an `exported` attribute as exported (pre-4.2 default).
    pub provider_default_exported: bool,
}

impl Default for ExposureOptions {
    fn default() -> Self {
        ExposureOptions {
            provider_default_exported: true,
        }
    }
}

pub fn determine_exposed(c: &ComponentDecl, declared_permissions: &PermissionLevels) -> ExposureVerdict {
    determine_exposed_with(c, declared_permissions, ExposureOptions::default())
}

pub fn determine_exposed_with(
    c: &ComponentDecl,
    declared_permissions: &PermissionLevels,
    opts: ExposureOptions,
) -> ExposureVerdict {
    let reason = exposure_reason(c, declared_permissions, opts);
    ExposureVerdict {
        component: c.name.clone(),
        kind: c.kind,
        exposed: reason.implies_exposed(),
        reason,
    }
}

fn exposure_reason(
    c: &ComponentDecl,
    perms: &PermissionLevels,
    opts: ExposureOptions,
) -> ExposureReason {
    if !c.enabled {
        return ExposureReason::Disabled;
    }
    let exported = match c.exported {
        Some(true) => ExposureReason::ExplicitExported,
        Some(false) => return ExposureReason::NotExported,
        None if c.kind == ComponentKind::Provider => {
            if opts.provider_default_exported {
                ExposureReason::ImplicitProviderDefault
            } else {
                return ExposureReason::NotExported;
            }
        }
        None if c.has_intent_filter => ExposureReason::ImplicitIntentFilter,
        None => return ExposureReason::NotExported,
    };
    match &c.permission {
        None => exported,
        // Unknown levels count as strong.
        Some(p) => match perms.get(p) {
            Some(ProtectionLevel::Normal) => exported,
            _ => ExposureReason::ProtectedByStrongPermission,
        },
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCount {
    pub all: usize,
    pub unique: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureReport {
    pub verdicts: Vec<(String, ExposureVerdict)>,
    /// Exposed components per kind; `unique` counts distinct component names.
    pub counts: BTreeMap<ComponentKind, KindCount>,
    pub total: KindCount,
}

impl ExposureReport {
    pub fn exposed(&self) -> impl Iterator<Item = &ExposureVerdict> {
        self.verdicts.iter().map(|(_, v)| v).filter(|v| v.exposed)
    }
}

/// Merge the bundle's own permission declarations over a system table.
pub fn effective_permissions(bundle: &AppBundle, system: &PermissionLevels) -> PermissionLevels {
    let mut out = system.clone();
    out.extend(bundle.permissions_declared.iter().map(|(k, v)| (k.clone(), *v)));
    out
}

/// Verdicts for every component of every bundle plus exposed counts by kind.
pub fn exposure_report<'a>(
    bundles: impl IntoIterator<Item = &'a AppBundle>,
    system: &PermissionLevels,
    opts: ExposureOptions,
) -> ExposureReport {
    let mut report = ExposureReport::default();
    let mut names: BTreeMap<ComponentKind, BTreeSet<String>> = BTreeMap::new();
    let mut all_names = BTreeSet::new();
    for bundle in bundles {
        let perms = effective_permissions(bundle, system);
        for c in &bundle.components {
            let v = determine_exposed_with(c, &perms, opts);
            if v.exposed {
                report.counts.entry(c.kind).or_default().all += 1;
                report.total.all += 1;
                names.entry(c.kind).or_default().insert(c.name.clone());
                all_names.insert(c.name.clone());
            }
            report.verdicts.push((bundle.package_name.clone(), v));
        }
    }
    for (kind, set) in names {
        report.counts.entry(kind).or_default().unique = set.len();
    }
    report.total.unique = all_names.len();
    report
}

/// Parse a `permission level` table (one pair per line, `#` comments).
pub fn parse_permission_levels(text: &str) -> Result<PermissionLevels, String> {
    let mut out = PermissionLevels::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(level), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("line {}: expected `<permission> <level>`", i + 1));
        };
        let level = ProtectionLevel::parse(level)
            .ok_or_else(|| format!("line {}: unknown protection level `{level}`", i + 1))?;
        out.insert(name.to_string(), level);
    }
    Ok(out)
}
