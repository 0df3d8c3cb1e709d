//! API-to-permission mapping files: `class|sub_signature|perm1,perm2|documented`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A sub-signature whose return type may be missing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartialSubSig {
    pub return_type: Option<String>,
    pub name: String,
    pub params: Vec<String>,
}

impl PartialSubSig {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| format!("`{s}`: missing `(`"))?;
        let close = s
            .strip_suffix(')')
            .map(|_| s.len() - 1)
            .ok_or_else(|| format!("`{s}`: must end with `)`"))?;
        let head = s[..open].trim();
        let (return_type, name) = match head.rsplit_once(char::is_whitespace) {
            Some((ret, name)) => (Some(ret.trim().to_string()), name.to_string()),
            None => (None, head.to_string()),
        };
        if name.is_empty() {
            return Err(format!("`{s}`: missing method name"));
        }
        let params = s[open + 1..close]
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::to_string)
            .collect();
        Ok(PartialSubSig {
            return_type,
            name,
            params,
        })
    }
}

impl fmt::Display for PartialSubSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = &self.return_type {
            write!(f, "{r} ")?;
        }
        write!(f, "{}({})", self.name, self.params.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MappingEntry {
    pub class_name: String,
    pub sub_signature: PartialSubSig,
    pub permissions: Vec<String>,
    pub documented: bool,
}

impl MappingEntry {
    pub fn first_permission(&self) -> Option<&str> {
        self.permissions.first().map(String::as_str)
    }
}

impl fmt::Display for MappingEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}|{}",
            self.class_name,
            self.sub_signature,
            self.permissions.join(","),
            self.documented
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("mapping line {line}: {msg}")]
pub struct MappingError {
    pub line: usize,
    pub msg: String,
}

pub fn parse_mapping(text: &str) -> Result<Vec<MappingEntry>, MappingError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let err = |msg: String| MappingError { line, msg };
        let fields: Vec<&str> = content.split('|').collect();
        let [class, sub, perms, documented] = fields[..] else {
            return Err(err(format!("expected 4 `|`-separated fields, found {}", fields.len())));
        };
        let documented = match documented.trim() {
            "true" => true,
            "false" => false,
            other => return Err(err(format!("documented flag `{other}` is not a boolean"))),
        };
        out.push(MappingEntry {
            class_name: class.trim().to_string(),
            sub_signature: PartialSubSig::parse(sub).map_err(err)?,
            permissions: perms
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(str::to_string)
                .collect(),
            documented,
        });
    }
    Ok(out)
}
