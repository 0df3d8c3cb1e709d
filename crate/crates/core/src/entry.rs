//! Entry points per exposed component and their lifecycle phases.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::manifest::ExposureVerdict;
use crate::model::{AppBundle, ComponentKind, Hierarchy, MethodBody, MethodSig};

const INTENT: &str = "android.content.Intent";
const MESSAGE: &str = "android.os.Message";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntryPoint {
    pub method: MethodSig,
    pub component: String,
    pub kind: ComponentKind,
    pub accepts_attack_input: bool,
    /// Parameter positions carrying external input.
    pub input_params: Vec<usize>,
}

/// Input-accepting callbacks by component kind: `(name, params, input positions)`.
/// `None` input positions mean every parameter.
type Callback = (&'static str, &'static [&'static str], Option<&'static [usize]>);

fn input_callbacks(kind: ComponentKind) -> &'static [Callback] {
    match kind {
        ComponentKind::Service => &[
            ("onBind", &[INTENT], Some(&[0])),
            ("onStart", &[INTENT, "int"], Some(&[0])),
            ("onStartCommand", &[INTENT, "int", "int"], Some(&[0])),
            ("onHandleIntent", &[INTENT], Some(&[0])),
        ],
        ComponentKind::Receiver => &[("onReceive", &["android.content.Context", INTENT], Some(&[1]))],
        ComponentKind::Provider => &[
            ("query", &["android.net.Uri", "java.lang.String[]", "java.lang.String", "java.lang.String[]", "java.lang.String"], None),
            ("insert", &["android.net.Uri", "android.content.ContentValues"], None),
            ("update", &["android.net.Uri", "android.content.ContentValues", "java.lang.String", "java.lang.String[]"], None),
            ("delete", &["android.net.Uri", "java.lang.String", "java.lang.String[]"], None),
            ("openFile", &["android.net.Uri", "java.lang.String"], None),
        ],
        ComponentKind::Activity => &[],
    }
}

fn is_lifecycle(m: &MethodSig) -> bool {
    match m.method_name.as_str() {
        "onCreate" => true,
        "onStart" => m.param_types.is_empty(),
        "onResume" | "onStop" | "onDestroy" => m.param_types.is_empty(),
        _ => false,
    }
}

/// App-defined methods visible on `class`, closest definition per name and
/// parameter list.
fn visible_methods<'a>(h: &Hierarchy<'a>, class: &str) -> Vec<&'a MethodBody> {
    let mut by_key: BTreeMap<String, &MethodBody> = BTreeMap::new();
    for c in h.superclass_chain(class) {
        let Some(decl) = h.class(c).filter(|_| h.is_app_class(c)) else {
            continue;
        };
        for m in &decl.methods {
            if m.has_body() {
                by_key.entry(m.signature.name_and_params()).or_insert(m);
            }
        }
    }
    by_key.into_values().collect()
}

fn entries_for(bundle: &AppBundle, h: &Hierarchy, name: &str, kind: ComponentKind) -> Vec<EntryPoint> {
    let mut out = Vec::new();
    let mk = |m: &MethodSig, input: Option<Vec<usize>>| EntryPoint {
        method: m.clone(),
        component: name.to_string(),
        kind,
        accepts_attack_input: input.is_some(),
        input_params: input.unwrap_or_default(),
    };
    for m in visible_methods(h, name) {
        let sig = &m.signature;
        let input = input_callbacks(kind).iter().find(|(n, ps, _)| {
            sig.method_name == *n && sig.param_types.iter().map(String::as_str).eq(ps.iter().copied())
        });
        if let Some((_, ps, positions)) = input {
            let positions = positions.map_or_else(|| (0..ps.len()).collect(), |p| p.to_vec());
            out.push(mk(sig, Some(positions)));
        } else if is_lifecycle(sig) {
            out.push(mk(sig, None));
        }
    }
    if kind == ComponentKind::Service {
        let prefix = format!("{name}$");
        for c in bundle.classes.iter().filter(|c| c.name.starts_with(&prefix)) {
            if let Some(m) = c
                .find_override("handleMessage", &[MESSAGE.to_string()])
                .filter(|m| m.has_body())
            {
                out.push(mk(&m.signature, Some(vec![0])));
            }
        }
    }
    out.sort();
    out
}

/// Entry points of every exposed component in `verdicts`.
pub fn locate_entries(bundle: &AppBundle, verdicts: &[ExposureVerdict]) -> Vec<EntryPoint> {
    let h = Hierarchy::from_parts(&bundle.classes, &[]);
    verdicts
        .iter()
        .filter(|v| v.exposed)
        .flat_map(|v| entries_for(bundle, &h, &v.component, v.kind))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecyclePlan {
    pub component: String,
    /// `<clinit>` then `<init>()` then `onCreate`, where present.
    pub initial: Vec<MethodSig>,
    /// Input-accepting entries; no order among them.
    pub main: Vec<EntryPoint>,
    /// Remaining lifecycle callbacks.
    pub other: Vec<EntryPoint>,
}

impl LifecyclePlan {
    /// Every entry to analyze, main phase first.
    pub fn entries(&self) -> impl Iterator<Item = &EntryPoint> {
        self.main.iter().chain(&self.other)
    }

    /// Initial-phase methods reachable by a null-context hop from `entry`, in
    /// reverse execution order.
    pub fn initial_before(&self, entry: &MethodSig) -> Vec<MethodSig> {
        let end = self
            .initial
            .iter()
            .position(|m| m == entry)
            .unwrap_or(self.initial.len());
        self.initial[..end].iter().rev().cloned().collect()
    }
}

pub fn plan_lifecycle(bundle: &AppBundle, component: &str, entries: &[EntryPoint]) -> LifecyclePlan {
    let h = Hierarchy::from_parts(&bundle.classes, &[]);
    let visible = visible_methods(&h, component);
    let find = |name: &str, params: Option<&[String]>| {
        visible
            .iter()
            .filter(|m| m.signature.method_name == name)
            .find(|m| params.is_none_or(|p| m.signature.param_types == p))
            .map(|m| m.signature.clone())
    };
    let mut initial: Vec<MethodSig> = Vec::new();
    // Static initializers are not inherited; only the component class's own counts.
    if let Some(m) = bundle
        .class(component)
        .and_then(|c| c.methods.iter().find(|m| m.signature.method_name == "<clinit>"))
        .filter(|m| m.has_body())
    {
        initial.push(m.signature.clone());
    }
    initial.extend(find("<init>", Some(&[])));
    initial.extend(find("onCreate", None));

    let mine = entries.iter().filter(|e| e.component == component);
    let (main, other): (Vec<EntryPoint>, Vec<EntryPoint>) =
        mine.cloned().partition(|e| e.accepts_attack_input);
    LifecyclePlan {
        component: component.to_string(),
        initial,
        main,
        other,
    }
}
