//! Plain-text `AndroidManifest.xml` reader (binary XML is not supported).

use std::collections::BTreeMap;

use roxmltree::{Document, Node};

use super::{ComponentDecl, ComponentKind, ProtectionLevel};
use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestModel {
    pub package_name: String,
    pub components: Vec<ComponentDecl>,
    pub permissions_declared: BTreeMap<String, ProtectionLevel>,
}

/// Attribute lookup by local name, so both `name` and `android:name` work.
fn attr<'a>(node: Node<'a, '_>, local: &str) -> Option<&'a str> {
    node.attributes()
        .find(|a| a.name() == local)
        .map(|a| a.value())
}

fn line_of(doc: &Document, node: Node) -> usize {
    doc.text_pos_at(node.range().start).row as usize
}

fn parse_bool(
    doc: &Document,
    node: Node,
    local: &str,
    file: &str,
) -> Result<Option<bool>, ModelError> {
    match attr(node, local) {
        None => Ok(None),
        Some("true") => Ok(Some(true)),
        Some("false") => Ok(Some(false)),
        Some(other) => Err(ModelError::parse(
            file,
            line_of(doc, node),
            format!("attribute {local}=\"{other}\" is not a boolean"),
        )),
    }
}

/// Expand `.Foo` and bare `Foo` class names relative to the package.
fn qualify(package: &str, name: &str) -> String {
    if let Some(rest) = name.strip_prefix('.') {
        format!("{package}.{rest}")
    } else if !name.contains('.') {
        format!("{package}.{name}")
    } else {
        name.to_string()
    }
}

/// Parse manifest bytes. Non-UTF-8 input is rejected with an encoding error.
pub fn parse_manifest(bytes: &[u8], file: &str) -> Result<ManifestModel, ModelError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ModelError::Encoding {
        file: file.to_string(),
        detail: e.to_string(),
    })?;
    let doc = Document::parse(text).map_err(|e| {
        ModelError::parse(file, e.pos().row as usize, e.to_string())
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "manifest" {
        return Err(ModelError::parse(
            file,
            line_of(&doc, root),
            format!("root element is <{}>, expected <manifest>", root.tag_name().name()),
        ));
    }
    let package_name = attr(root, "package").unwrap_or("").trim().to_string();
    if package_name.is_empty() {
        return Err(ModelError::parse(file, line_of(&doc, root), "manifest has no package name"));
    }

    let mut permissions_declared = BTreeMap::new();
    let mut components = Vec::new();

    for child in root.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "permission" => {
                let name = attr(child, "name").ok_or_else(|| {
                    ModelError::parse(file, line_of(&doc, child), "<permission> without name")
                })?;
                let level = match attr(child, "protectionLevel") {
                    None => ProtectionLevel::Normal,
                    Some(l) => ProtectionLevel::parse(l).ok_or_else(|| {
                        ModelError::parse(
                            file,
                            line_of(&doc, child),
                            format!("unknown protectionLevel `{l}`"),
                        )
                    })?,
                };
                permissions_declared.insert(qualify(&package_name, name), level);
            }
            "application" => {
                let app_enabled = parse_bool(&doc, child, "enabled", file)?.unwrap_or(true);
                for node in child.children().filter(Node::is_element) {
                    let Some(kind) = ComponentKind::from_tag(node.tag_name().name()) else {
                        continue;
                    };
                    let raw_name = attr(node, "name").ok_or_else(|| {
                        ModelError::parse(file, line_of(&doc, node), "component without name")
                    })?;
                    let mut decl = ComponentDecl::new(qualify(&package_name, raw_name), kind);
                    decl.enabled =
                        app_enabled && parse_bool(&doc, node, "enabled", file)?.unwrap_or(true);
                    decl.exported = parse_bool(&doc, node, "exported", file)?;
                    decl.permission = attr(node, "permission").map(str::to_string);
                    for filter in node
                        .children()
                        .filter(|n| n.is_element() && n.tag_name().name() == "intent-filter")
                    {
                        decl.has_intent_filter = true;
                        decl.intent_filter_actions.extend(
                            filter
                                .children()
                                .filter(|n| n.is_element() && n.tag_name().name() == "action")
                                .filter_map(|n| attr(n, "name"))
                                .map(str::to_string),
                        );
                    }
                    components.push(decl);
                }
            }
            _ => {}
        }
    }

    Ok(ManifestModel {
        package_name,
        components,
        permissions_declared,
    })
}

/// Render a manifest model back to XML.
pub fn render_manifest(m: &ManifestModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("<manifest package=\"{}\">\n", xml_escape(&m.package_name)));
    for (name, level) in &m.permissions_declared {
        out.push_str(&format!(
            "  <permission name=\"{}\" protectionLevel=\"{}\"/>\n",
            xml_escape(name),
            level.as_str()
        ));
    }
    out.push_str("  <application>\n");
    for c in &m.components {
        out.push_str(&format!("    <{} name=\"{}\"", c.kind.tag(), xml_escape(&c.name)));
        if !c.enabled {
            out.push_str(" enabled=\"false\"");
        }
        if let Some(e) = c.exported {
            out.push_str(&format!(" exported=\"{e}\""));
        }
        if let Some(p) = &c.permission {
            out.push_str(&format!(" permission=\"{}\"", xml_escape(p)));
        }
        if c.has_intent_filter {
            out.push_str(">\n      <intent-filter>\n");
            for a in &c.intent_filter_actions {
                out.push_str(&format!("        <action name=\"{}\"/>\n", xml_escape(a)));
            }
            out.push_str(&format!("      </intent-filter>\n    </{}>\n", c.kind.tag()));
        } else {
            out.push_str("/>\n");
        }
    }
    out.push_str("  </application>\n</manifest>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
