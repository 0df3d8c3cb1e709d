//! VSink selection and classification: a small rule language over an
//! API-to-permission mapping, signature restoration against framework stubs,
//! and the resulting sink/source datasets.

mod dataset;
mod interpret;
mod mapping;
mod restore;
mod rules;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dataset::{
    emit_datasets, parse_source_lines, parse_sink_lines, render_source_lines, render_sink_lines,
    DatasetError, VSinkDataset, SINKS_FILE, SOURCES_FILE,
};
pub use interpret::{interpret, render_classification, Classification, RuleTrace};
pub use mapping::{parse_mapping, MappingEntry, MappingError, PartialSubSig};
pub use restore::{restore_all, restore_signature, RestoreError, RestoredEntry};
pub use rules::{parse_rules, Action, ClassificationRule, Metric, RuleSyntaxError, Tag};

use crate::model::MethodSig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "VS_Direct")]
    Direct,
    #[serde(rename = "VS_DirectByParam")]
    DirectByParam,
    #[serde(rename = "VS_Input")]
    Input,
    #[serde(rename = "VS_Public")]
    Public,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Direct,
        Category::DirectByParam,
        Category::Input,
        Category::Public,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Direct => "VS_Direct",
            Category::DirectByParam => "VS_DirectByParam",
            Category::Input => "VS_Input",
            Category::Public => "VS_Public",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VSinkEntry {
    pub signature: MethodSig,
    pub category: Category,
    /// Priority of the rule that tagged the entry; absent when loaded from a dataset file.
    pub origin_rule: Option<i64>,
    pub permissions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VSourceEntry {
    pub signature: MethodSig,
    pub permissions: Vec<String>,
}
