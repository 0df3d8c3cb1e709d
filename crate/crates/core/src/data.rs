//! Analysis data: framework stubs, VSink/VSource lists, broadcast list, flow
//! models, skip list, filter patterns and permission levels. A copy ships
//! inside the library; a data directory may override any file.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backward::{parse_skip_list, SkipList};
use crate::error::ModelError;
use crate::filter::{parse_patterns, FilterPattern, PatternError};
use crate::forward::{parse_flow_models, parse_system_broadcasts, FlowModel};
use crate::manifest::{parse_permission_levels, PermissionLevels};
use crate::model::FrameworkIndex;
use crate::vsink::{
    interpret, parse_mapping, parse_rules, parse_sink_lines, parse_source_lines, render_sink_lines,
    render_source_lines, restore_all, Classification, DatasetError, MappingError, RestoreError,
    RuleSyntaxError, VSinkDataset, SINKS_FILE, SOURCES_FILE,
};

pub const FRAMEWORK_FILE: &str = "framework.ir";
pub const BROADCASTS_FILE: &str = "system_broadcasts.txt";
pub const FLOW_MODELS_FILE: &str = "flow_models.txt";
pub const SKIP_FILE: &str = "uncritical_params.txt";
pub const PATTERNS_FILE: &str = "patterns.txt";
pub const PERMISSIONS_FILE: &str = "permission_levels.txt";
pub const MAPPING_FILE: &str = "mapping.txt";
pub const SUPPLEMENTARY_FILE: &str = "supplementary.txt";
pub const RULES_FILE: &str = "rules.txt";
pub const DATASET_MANIFEST_FILE: &str = "datasets.sha256";

/// Data directory override.
pub const DATA_DIR_ENV: &str = "ECV_DATA_DIR";

const BUNDLED: &[(&str, &str)] = &[
    (FRAMEWORK_FILE, include_str!("../data/framework.ir")),
    (SINKS_FILE, include_str!("../data/vsinks.txt")),
    (SOURCES_FILE, include_str!("../data/vsources.txt")),
    (BROADCASTS_FILE, include_str!("../data/system_broadcasts.txt")),
    (FLOW_MODELS_FILE, include_str!("../data/flow_models.txt")),
    (SKIP_FILE, include_str!("../data/uncritical_params.txt")),
    (PATTERNS_FILE, include_str!("../data/patterns.txt")),
    (PERMISSIONS_FILE, include_str!("../data/permission_levels.txt")),
    (MAPPING_FILE, include_str!("../data/mapping.txt")),
    (SUPPLEMENTARY_FILE, include_str!("../data/supplementary.txt")),
    (RULES_FILE, include_str!("../data/rules.txt")),
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{file}: {source}")]
    Mapping {
        file: String,
        #[source]
        source: MappingError,
    },
    #[error("{RULES_FILE}: {0}")]
    Rules(#[from] RuleSyntaxError),
    #[error(transparent)]
    Restore(#[from] RestoreError),
    #[error("{PATTERNS_FILE}: {0}")]
    Patterns(#[from] PatternError),
    #[error("{file}: {msg}")]
    Syntax { file: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Raw text of every data file, keyed by file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataFiles {
    pub files: BTreeMap<String, String>,
    /// Where each file came from: `bundled` or a path.
    pub origins: BTreeMap<String, String>,
}

impl DataFiles {
    pub fn bundled() -> Self {
        DataFiles {
            files: BUNDLED.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect(),
            origins: BUNDLED.iter().map(|(n, _)| (n.to_string(), "bundled".to_string())).collect(),
        }
    }

    /// Bundled data with files present in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, DataError> {
        let mut out = Self::bundled();
        for (name, _) in BUNDLED {
            let p = dir.join(name);
            if p.is_file() {
                out.files.insert(name.to_string(), fs::read_to_string(&p).map_err(io_err(&p))?);
                out.origins.insert(name.to_string(), p.display().to_string());
            }
        }
        Ok(out)
    }

    /// `dir` if given, else `$ECV_DATA_DIR` if set, else the bundled copy.
    pub fn resolve(dir: Option<&Path>) -> Result<Self, DataError> {
        match dir.map(Path::to_path_buf).or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)) {
            Some(d) => Self::with_overrides(&d),
            None => Ok(Self::bundled()),
        }
    }

    pub fn get(&self, name: &str) -> &str {
        self.files.get(name).map(String::as_str).unwrap_or("")
    }

    pub fn sha256(&self, name: &str) -> String {
        sha256_hex(self.get(name).as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parsed analysis data.
#[derive(Debug, Clone)]
pub struct AnalysisData {
    pub framework: FrameworkIndex,
    pub dataset: VSinkDataset,
    pub system_broadcasts: HashSet<String>,
    pub flow_models: Vec<FlowModel>,
    pub skip: SkipList,
    pub patterns: Vec<FilterPattern>,
    pub permissions: PermissionLevels,
    /// sha256 of each input file.
    pub hashes: BTreeMap<String, String>,
}

impl AnalysisData {
    pub fn from_files(files: &DataFiles) -> Result<Self, DataError> {
        let syntax = |file: &str| {
            let file = file.to_string();
            move |msg: String| DataError::Syntax { file, msg }
        };
        let sinks = parse_sink_lines(files.get(SINKS_FILE), SINKS_FILE)?;
        let sources = parse_source_lines(files.get(SOURCES_FILE), SOURCES_FILE)?;
        let broadcasts = parse_system_broadcasts(files.get(BROADCASTS_FILE));
        if broadcasts.is_empty() {
            log::warn!("{BROADCASTS_FILE} is empty; no receiver will be suppressed");
        }
        let used = [
            FRAMEWORK_FILE,
            SINKS_FILE,
            SOURCES_FILE,
            BROADCASTS_FILE,
            FLOW_MODELS_FILE,
            SKIP_FILE,
            PATTERNS_FILE,
            PERMISSIONS_FILE,
        ];
        Ok(AnalysisData {
            framework: FrameworkIndex::parse(files.get(FRAMEWORK_FILE), FRAMEWORK_FILE)?,
            dataset: VSinkDataset::new(sinks, sources),
            system_broadcasts: broadcasts.into_iter().collect(),
            flow_models: parse_flow_models(files.get(FLOW_MODELS_FILE)).map_err(syntax(FLOW_MODELS_FILE))?,
            skip: parse_skip_list(files.get(SKIP_FILE)).map_err(syntax(SKIP_FILE))?,
            patterns: parse_patterns(files.get(PATTERNS_FILE))?,
            permissions: parse_permission_levels(files.get(PERMISSIONS_FILE)).map_err(syntax(PERMISSIONS_FILE))?,
            hashes: used.iter().map(|n| (n.to_string(), files.sha256(n))).collect(),
        })
    }

    pub fn bundled() -> Result<Self, DataError> {
        Self::from_files(&DataFiles::bundled())
    }
}

/// Output of the dataset builder.
#[derive(Debug, Clone)]
pub struct BuiltDatasets {
    pub classification: Classification,
    pub sinks_text: String,
    pub sources_text: String,
    /// `sha256  file` lines for inputs and outputs.
    pub manifest_text: String,
}

/// Restore the mapping and supplementary entries against the framework
/// stubs and classify them with the rules.
pub fn build_datasets(files: &DataFiles) -> Result<BuiltDatasets, DataError> {
    let framework = FrameworkIndex::parse(files.get(FRAMEWORK_FILE), FRAMEWORK_FILE)?;
    let rules = parse_rules(files.get(RULES_FILE))?;
    let mut entries = Vec::new();
    for name in [MAPPING_FILE, SUPPLEMENTARY_FILE] {
        entries.extend(parse_mapping(files.get(name)).map_err(|source| DataError::Mapping {
            file: name.to_string(),
            source,
        })?);
    }
    let restored = restore_all(&entries, &framework)?;
    let classification = interpret(&rules, &restored);
    let sinks_text = render_sink_lines(&classification.sinks);
    let sources_text = render_source_lines(&classification.sources);
    let mut manifest_text = String::new();
    for name in [FRAMEWORK_FILE, MAPPING_FILE, SUPPLEMENTARY_FILE, RULES_FILE] {
        manifest_text.push_str(&format!("{}  {name}\n", files.sha256(name)));
    }
    for (name, text) in [(SINKS_FILE, &sinks_text), (SOURCES_FILE, &sources_text)] {
        manifest_text.push_str(&format!("{}  {name}\n", sha256_hex(text.as_bytes())));
    }
    Ok(BuiltDatasets {
        classification,
        sinks_text,
        sources_text,
        manifest_text,
    })
}

/// Write `vsinks.txt`, `vsources.txt` and `datasets.sha256` into `dir`.
pub fn write_datasets(built: &BuiltDatasets, dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = Vec::new();
    for (name, text) in [
        (SINKS_FILE, &built.sinks_text),
        (SOURCES_FILE, &built.sources_text),
        (DATASET_MANIFEST_FILE, &built.manifest_text),
    ] {
        let p = dir.join(name);
        fs::write(&p, text).map_err(io_err(&p))?;
        out.push(p);
    }
    Ok(out)
}
