//! `vsinks.txt` / `vsources.txt`: sorted `category|signature|permissions` lines.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{Category, VSinkEntry, VSourceEntry};
use crate::model::ir::parse_sig;
use crate::model::MethodSig;

pub const SINKS_FILE: &str = "vsinks.txt";
pub const SOURCES_FILE: &str = "vsources.txt";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file} line {line}: {msg}")]
    Syntax {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn perms(p: &[String]) -> String {
    p.join(",")
}

pub fn render_sink_lines(sinks: &[VSinkEntry]) -> String {
    let mut lines: Vec<String> = sinks
        .iter()
        .map(|s| format!("{}|{}|{}", s.category, s.signature, perms(&s.permissions)))
        .collect();
    lines.sort();
    lines.dedup();
    lines.iter().map(|l| format!("{l}\n")).collect()
}

pub fn render_source_lines(sources: &[VSourceEntry]) -> String {
    let mut lines: Vec<String> = sources
        .iter()
        .map(|s| format!("VSource|{}|{}", s.signature, perms(&s.permissions)))
        .collect();
    lines.sort();
    lines.dedup();
    lines.iter().map(|l| format!("{l}\n")).collect()
}

fn split_line<'a>(
    file: &str,
    line: usize,
    raw: &'a str,
) -> Result<(&'a str, MethodSig, Vec<String>), DatasetError> {
    let err = |msg: String| DatasetError::Syntax {
        file: file.to_string(),
        line,
        msg,
    };
    let mut parts = raw.splitn(3, '|');
    let (Some(tag), Some(sig), Some(p)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(err("expected `tag|signature|permissions`".into()));
    };
    let sig = parse_sig(sig.trim()).map_err(err)?;
    let p = p
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    Ok((tag.trim(), sig, p))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_sink_lines(text: &str, file: &str) -> Result<Vec<VSinkEntry>, DatasetError> {
    content_lines(text)
        .map(|(n, l)| {
            let (tag, signature, permissions) = split_line(file, n, l)?;
            let category: Category = tag.parse().map_err(|msg| DatasetError::Syntax {
                file: file.to_string(),
                line: n,
                msg,
            })?;
            Ok(VSinkEntry {
                signature,
                category,
                origin_rule: None,
                permissions,
            })
        })
        .collect()
}

pub fn parse_source_lines(text: &str, file: &str) -> Result<Vec<VSourceEntry>, DatasetError> {
    content_lines(text)
        .map(|(n, l)| {
            let (tag, signature, permissions) = split_line(file, n, l)?;
            if tag != "VSource" {
                return Err(DatasetError::Syntax {
                    file: file.to_string(),
                    line: n,
                    msg: format!("expected tag `VSource`, found `{tag}`"),
                });
            }
            Ok(VSourceEntry {
                signature,
                permissions,
            })
        })
        .collect()
}

/// Write both dataset files into `dir` and return their paths.
pub fn emit_datasets(
    sinks: &[VSinkEntry],
    sources: &[VSourceEntry],
    dir: &Path,
) -> Result<(PathBuf, PathBuf), DatasetError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DatasetError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let sp = dir.join(SINKS_FILE);
    let vp = dir.join(SOURCES_FILE);
    fs::write(&sp, render_sink_lines(sinks)).map_err(io(&sp))?;
    fs::write(&vp, render_source_lines(sources)).map_err(io(&vp))?;
    Ok((sp, vp))
}

/// Lookup tables used during analysis.
#[derive(Debug, Clone, Default)]
pub struct VSinkDataset {
    pub sinks: HashMap<MethodSig, VSinkEntry>,
    pub sources: HashSet<MethodSig>,
}

impl VSinkDataset {
    pub fn new(sinks: Vec<VSinkEntry>, sources: Vec<VSourceEntry>) -> Self {
        VSinkDataset {
            sinks: sinks.into_iter().map(|s| (s.signature.clone(), s)).collect(),
            sources: sources.into_iter().map(|s| s.signature).collect(),
        }
    }

    pub fn parse(sinks_text: &str, sources_text: &str) -> Result<Self, DatasetError> {
        Ok(Self::new(
            parse_sink_lines(sinks_text, SINKS_FILE)?,
            parse_source_lines(sources_text, SOURCES_FILE)?,
        ))
    }

    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|source| DatasetError::Io { path: p, source })
        };
        Self::parse(&read(SINKS_FILE)?, &read(SOURCES_FILE)?)
    }

    pub fn sink(&self, sig: &MethodSig) -> Option<&VSinkEntry> {
        self.sinks.get(sig)
    }

    pub fn is_source(&self, sig: &MethodSig) -> bool {
        self.sources.contains(sig)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sink(c: Category, class: &str, name: &str) -> VSinkEntry {
        VSinkEntry {
            signature: MethodSig::new(class, "void", name, &["java.lang.String"]),
            category: c,
            origin_rule: Some(1),
            permissions: vec!["p.A".into(), "p.B".into()],
        }
    }

    #[test]
    fn lines_are_sorted_and_round_trip() {
        let sinks = vec![sink(Category::Public, "z.Z", "f"), sink(Category::Direct, "a.A", "g")];
        let text = render_sink_lines(&sinks);
        assert_eq!(
            text,
            "VS_Direct|<a.A: void g(java.lang.String)>|p.A,p.B\nVS_Public|<z.Z: void f(java.lang.String)>|p.A,p.B\n"
        );
        let back = parse_sink_lines(&text, "t").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].signature, sinks[1].signature);
        assert_eq!(back[0].origin_rule, None);
    }

    #[test]
    fn empty_dataset_is_empty_file() {
        assert_eq!(render_sink_lines(&[]), "");
        assert!(parse_sink_lines("", "t").unwrap().is_empty());
    }

    #[test]
    fn source_tag_checked() {
        assert!(parse_source_lines("VS_Direct|<a.A: void f()>|", "t").is_err());
        let v = parse_source_lines("VSource|<a.A: int f()>|", "t").unwrap();
        assert!(v[0].permissions.is_empty());
    }

    #[test]
    fn emit_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let sinks = vec![sink(Category::Input, "a.A", "g")];
        let sources = vec![VSourceEntry {
            signature: MethodSig::new("a.L", "android.location.Location", "get", &[]),
            permissions: vec![],
        }];
        emit_datasets(&sinks, &sources, dir.path()).unwrap();
        let ds = VSinkDataset::load(dir.path()).unwrap();
        assert!(ds.sink(&sinks[0].signature).is_some());
        assert!(ds.is_source(&sources[0].signature));
    }
}
