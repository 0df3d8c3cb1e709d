use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::ir::{parse_classes, render_class};
use super::manifest_xml::{parse_manifest, render_manifest, ManifestModel};
use super::{AppBundle, ClassDecl};
use crate::error::ModelError;

pub const MANIFEST_FILE: &str = "AndroidManifest.xml";
pub const CLASSES_DIR: &str = "classes";

/// Stub declarations of framework classes: hierarchy and method signatures, no bodies.
#[derive(Debug, Clone, Default)]
pub struct FrameworkIndex {
    pub classes: Vec<ClassDecl>,
}

impl FrameworkIndex {
    pub fn parse(text: &str, file: &str) -> Result<Self, ModelError> {
        Ok(FrameworkIndex {
            classes: parse_classes(text, file)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = fs::read(path).map_err(|e| ModelError::io(path, e))?;
        let text = decode(&bytes, path)?;
        Self::parse(text, &path.display().to_string())
    }

    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }
}

fn decode<'a>(bytes: &'a [u8], path: &Path) -> Result<&'a str, ModelError> {
    std::str::from_utf8(bytes).map_err(|e| ModelError::Encoding {
        file: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn collect_ir_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ModelError> {
    let entries = fs::read_dir(dir).map_err(|e| ModelError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| ModelError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_ir_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "ir") {
            out.push(path);
        }
    }
    Ok(())
}

/// Load a bundle directory: `AndroidManifest.xml` plus class IR documents
/// (`*.ir`) under `classes/` (or the bundle root when `classes/` is absent).
pub fn parse_bundle(path: &Path) -> Result<AppBundle, ModelError> {
    let manifest_path = path.join(MANIFEST_FILE);
    let bytes = fs::read(&manifest_path).map_err(|e| ModelError::io(&manifest_path, e))?;
    let manifest = parse_manifest(&bytes, &manifest_path.display().to_string())?;

    let class_dir = path.join(CLASSES_DIR);
    let mut files = Vec::new();
    collect_ir_files(if class_dir.is_dir() { &class_dir } else { path }, &mut files)?;
    files.sort();

    let mut classes = Vec::new();
    for file in &files {
        let bytes = fs::read(file).map_err(|e| ModelError::io(file, e))?;
        let text = decode(&bytes, file)?;
        classes.extend(parse_classes(text, &file.display().to_string())?);
    }
    link(manifest, classes)
}

/// Assemble and validate a bundle from an already parsed manifest and classes.
pub(crate) fn link(manifest: ManifestModel, classes: Vec<ClassDecl>) -> Result<AppBundle, ModelError> {
    let mut seen = HashSet::new();
    for c in &classes {
        if !seen.insert(c.name.as_str()) {
            return Err(ModelError::parse(&c.name, 0, format!("class {} declared twice", c.name)));
        }
    }
    check_acyclic(&classes)?;
    for comp in &manifest.components {
        if !seen.contains(comp.name.as_str()) {
            return Err(ModelError::Link {
                component: comp.name.clone(),
                class: comp.name.clone(),
            });
        }
    }
    Ok(AppBundle {
        package_name: manifest.package_name,
        components: manifest.components,
        classes,
        permissions_declared: manifest.permissions_declared,
    })
}

fn check_acyclic(classes: &[ClassDecl]) -> Result<(), ModelError> {
    let parent: HashMap<&str, &str> = classes
        .iter()
        .filter_map(|c| c.superclass.as_deref().map(|s| (c.name.as_str(), s)))
        .collect();
    for c in classes {
        let mut seen = HashSet::new();
        let mut cur = c.name.as_str();
        while let Some(&next) = parent.get(cur) {
            if !seen.insert(cur) {
                return Err(ModelError::parse(
                    &c.name,
                    0,
                    format!("superclass chain of {} is cyclic", c.name),
                ));
            }
            cur = next;
        }
    }
    Ok(())
}

/// Write a bundle back to disk in the same layout `parse_bundle` reads.
pub fn serialize_bundle(bundle: &AppBundle, dir: &Path) -> Result<(), ModelError> {
    let class_dir = dir.join(CLASSES_DIR);
    fs::create_dir_all(&class_dir).map_err(|e| ModelError::io(&class_dir, e))?;
    let manifest = ManifestModel {
        package_name: bundle.package_name.clone(),
        components: bundle.components.clone(),
        permissions_declared: bundle
            .permissions_declared
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect::<BTreeMap<_, _>>(),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, render_manifest(&manifest)).map_err(|e| ModelError::io(&manifest_path, e))?;
    for (i, class) in bundle.classes.iter().enumerate() {
        // Index prefix keeps the original class order on re-read.
        let path = class_dir.join(format!("{i:04}_{}.ir", class.name));
        fs::write(&path, render_class(class)).map_err(|e| ModelError::io(&path, e))?;
    }
    Ok(())
}
