//! Fill in missing return types from framework stubs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mapping::MappingEntry;
use crate::model::{FrameworkIndex, Hierarchy, MethodSig};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RestoredEntry {
    pub signature: MethodSig,
    pub permissions: Vec<String>,
    pub documented: bool,
}

impl RestoredEntry {
    pub fn first_permission(&self) -> Option<&str> {
        self.permissions.first().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot restore {} mapping entr{}: {}", .entries.len(), if .entries.len() == 1 { "y" } else { "ies" }, .entries.join("; "))]
pub struct RestoreError {
    pub entries: Vec<String>,
}

pub fn restore_signature(
    entry: &MappingEntry,
    framework: &FrameworkIndex,
) -> Result<RestoredEntry, RestoreError> {
    let sub = &entry.sub_signature;
    let return_type = match &sub.return_type {
        Some(r) => r.clone(),
        None => {
            let h = Hierarchy::from_parts(&[], &framework.classes);
            h.superclass_chain(&entry.class_name)
                .into_iter()
                .filter_map(|c| h.class(c))
                .find_map(|c| c.find_override(&sub.name, &sub.params))
                .map(|m| m.signature.return_type.clone())
                .ok_or_else(|| RestoreError {
                    entries: vec![entry.to_string()],
                })?
        }
    };
    Ok(RestoredEntry {
        signature: MethodSig {
            class_name: entry.class_name.clone(),
            return_type,
            method_name: sub.name.clone(),
            param_types: sub.params.clone(),
        },
        permissions: entry.permissions.clone(),
        documented: entry.documented,
    })
}

/// Restore every entry; failures are collected so the error lists all of them.
pub fn restore_all(
    entries: &[MappingEntry],
    framework: &FrameworkIndex,
) -> Result<Vec<RestoredEntry>, RestoreError> {
    let mut ok = Vec::with_capacity(entries.len());
    let mut failed = Vec::new();
    for e in entries {
        match restore_signature(e, framework) {
            Ok(r) => ok.push(r),
            Err(err) => failed.extend(err.entries),
        }
    }
    if failed.is_empty() {
        Ok(ok)
    } else {
        Err(RestoreError { entries: failed })
    }
}
