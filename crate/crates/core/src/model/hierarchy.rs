use std::collections::{HashMap, HashSet, VecDeque};

use super::{AppBundle, ClassDecl, FrameworkIndex, MethodBody, MethodSig, SubSig};

/// Combined app + framework class hierarchy. App classes shadow framework
/// stubs with the same name.
#[derive(Debug, Clone)]
pub struct Hierarchy<'a> {
    classes: HashMap<&'a str, &'a ClassDecl>,
    app: HashSet<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Resolved(MethodSig),
    Unresolved,
}

impl Resolution {
    pub fn sig(&self) -> Option<&MethodSig> {
        match self {
            Resolution::Resolved(s) => Some(s),
            Resolution::Unresolved => None,
        }
    }
}

impl<'a> Hierarchy<'a> {
    pub fn new(bundle: &'a AppBundle, framework: &'a FrameworkIndex) -> Self {
        Self::from_parts(&bundle.classes, &framework.classes)
    }

    pub fn from_parts(app: &'a [ClassDecl], framework: &'a [ClassDecl]) -> Self {
        let mut classes: HashMap<&str, &ClassDecl> =
            framework.iter().map(|c| (c.name.as_str(), c)).collect();
        classes.extend(app.iter().map(|c| (c.name.as_str(), c)));
        Hierarchy {
            classes,
            app: app.iter().map(|c| c.name.as_str()).collect(),
        }
    }

    pub fn class(&self, name: &str) -> Option<&'a ClassDecl> {
        self.classes.get(name).copied()
    }

    pub fn is_app_class(&self, name: &str) -> bool {
        self.app.contains(name)
    }

    /// `name` followed by its known superclasses, closest first. Stops at the
    /// first class missing from the hierarchy or on a repeated name.
    pub fn superclass_chain(&self, name: &str) -> Vec<&'a str> {
        let mut out: Vec<&'a str> = Vec::new();
        let mut cur = self.class(name);
        while let Some(c) = cur {
            if out.contains(&c.name.as_str()) {
                break;
            }
            out.push(c.name.as_str());
            cur = c.superclass.as_deref().and_then(|s| self.class(s));
        }
        out
    }

    /// Reflexive, transitive subtype test over superclasses and interfaces.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sub == sup {
            return true;
        }
        let mut queue = VecDeque::from([sub.to_string()]);
        let mut seen = HashSet::new();
        while let Some(cur) = queue.pop_front() {
            if cur == sup {
                return true;
            }
            if !seen.insert(cur.clone()) {
                continue;
            }
            if let Some(c) = self.class(&cur) {
                queue.extend(c.superclass.iter().cloned());
                queue.extend(c.interfaces.iter().cloned());
            }
        }
        false
    }

    pub fn method(&self, sig: &MethodSig) -> Option<&'a MethodBody> {
        self.class(&sig.class_name)?.find_method(&sig.sub_sig())
    }

    /// An app-defined method with a body.
    pub fn app_method(&self, sig: &MethodSig) -> Option<&'a MethodBody> {
        if !self.is_app_class(&sig.class_name) {
            return None;
        }
        self.method(sig).filter(|m| m.has_body())
    }

    /// First method named `name` (any parameters) along the superclass chain.
    pub fn resolve_by_name(&self, receiver_type: &str, name: &str) -> Option<&'a MethodBody> {
        self.superclass_chain(receiver_type)
            .into_iter()
            .filter_map(|c| self.class(c))
            .find_map(|c| c.methods.iter().find(|m| m.signature.method_name == name))
    }
}

/// Walk `receiver_type`'s superclass chain upward and return the closest
/// definition of `sub` (matched on name and parameter types).
pub fn resolve_virtual(receiver_type: &str, sub: &SubSig, hierarchy: &Hierarchy) -> Resolution {
    for class in hierarchy.superclass_chain(receiver_type) {
        if let Some(m) = hierarchy
            .class(class)
            .and_then(|c| c.find_override(&sub.name, &sub.params))
        {
            return Resolution::Resolved(m.signature.clone());
        }
    }
    Resolution::Unresolved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ir::parse_classes;

    fn framework() -> Vec<ClassDecl> {
        parse_classes(
            "class java.lang.Object\nmethod java.lang.String toString()\nmethod boolean equals(java.lang.Object)\n\
             class android.graphics.Bitmap extends java.lang.Object\nmethod int getWidth()\n\
             class java.lang.Runnable\nmethod void run()\n",
            "fw.ir",
        )
        .unwrap()
    }

    #[test]
    fn to_string_on_bitmap_resolves_to_object() {
        let fw = framework();
        let h = Hierarchy::from_parts(&[], &fw);
        let r = resolve_virtual("android.graphics.Bitmap", &SubSig::new("java.lang.String", "toString", &[]), &h);
        assert_eq!(r.sig().unwrap().class_name, "java.lang.Object");
    }

    #[test]
    fn own_definition_wins() {
        let fw = framework();
        let h = Hierarchy::from_parts(&[], &fw);
        let r = resolve_virtual("android.graphics.Bitmap", &SubSig::new("int", "getWidth", &[]), &h);
        assert_eq!(r.sig().unwrap().class_name, "android.graphics.Bitmap");
    }

    #[test]
    fn closest_definition_in_app_chain() {
        let fw = framework();
        let app = parse_classes(
            "class a.Base extends java.lang.Object\nmethod java.lang.String toString()\n  this r0\n  0: r1 = const \"b\"\n  1: return r1\n\
             class a.Child extends a.Base\n",
            "app.ir",
        )
        .unwrap();
        let h = Hierarchy::from_parts(&app, &fw);
        let r = resolve_virtual("a.Child", &SubSig::new("java.lang.String", "toString", &[]), &h);
        assert_eq!(r.sig().unwrap().class_name, "a.Base");
        assert!(h.app_method(r.sig().unwrap()).is_some());
    }

    #[test]
    fn missing_definition_is_unresolved() {
        let fw = framework();
        let h = Hierarchy::from_parts(&[], &fw);
        assert_eq!(
            resolve_virtual("android.graphics.Bitmap", &SubSig::new("void", "recycle", &[]), &h),
            Resolution::Unresolved
        );
        assert_eq!(
            resolve_virtual("com.missing.Phantom", &SubSig::new("void", "x", &[]), &h),
            Resolution::Unresolved
        );
    }

    #[test]
    fn subtype_through_interfaces() {
        let fw = framework();
        let app = parse_classes("class a.Job extends java.lang.Object implements java.lang.Runnable\n", "a.ir").unwrap();
        let h = Hierarchy::from_parts(&app, &fw);
        assert!(h.is_subtype("a.Job", "java.lang.Runnable"));
        assert!(h.is_subtype("a.Job", "java.lang.Object"));
        assert!(!h.is_subtype("java.lang.Object", "a.Job"));
    }
}
