//! Call-site resolution: sinks, app callees and modeled asynchronous flows.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::{resolve_virtual, Hierarchy, MethodBody, MethodSig, Op, Statement, Var};
use crate::vsink::{VSinkDataset, VSinkEntry};

/// `trigger_class trigger_method -> target_class target_method`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowModel {
    pub trigger_class: String,
    pub trigger_method: String,
    pub target_class: String,
    pub target_method: String,
}

pub fn parse_flow_models(text: &str) -> Result<Vec<FlowModel>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [tc, tm, "->", gc, gm] = toks[..] else {
            return Err(format!(
                "flow model line {}: expected `trigger_class trigger_method -> target_class target_method`",
                i + 1
            ));
        };
        out.push(FlowModel {
            trigger_class: tc.into(),
            trigger_method: tm.into(),
            target_class: gc.into(),
            target_method: gm.into(),
        });
    }
    Ok(out)
}

/// How a chain step reaches the next method.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hop {
    Direct,
    /// Framework-mediated dispatch; the callee runs on `object`. When the
    /// object is the call's receiver the callee parameters line up with the
    /// call arguments.
    Modeled { object: Var, positional: bool },
}

#[derive(Debug, Clone)]
pub enum CallTarget<'a> {
    Sink(&'a VSinkEntry),
    Callee { body: &'a MethodBody, hop: Hop },
}

/// Best-effort static types of a method's variables.
pub fn infer_types(m: &MethodBody) -> HashMap<Var, String> {
    let mut t = HashMap::new();
    if let Some(this) = &m.this_var {
        t.insert(this.clone(), m.signature.class_name.clone());
    }
    for (v, ty) in m.params.iter().zip(&m.signature.param_types) {
        t.insert(v.clone(), ty.clone());
    }
    for s in &m.statements {
        let Some(d) = s.def() else { continue };
        let ty = match s.op {
            Op::New => s.new_type.clone(),
            Op::CallSite => s.call_target.as_ref().map(|c| c.return_type.clone()),
            Op::FieldLoad => s.field_ref.as_ref().map(|f| f.field_type.clone()),
            Op::ConstLoad => match s.const_value {
                Some(crate::model::Literal::Str(_)) => Some("java.lang.String".into()),
                _ => Some("int".into()),
            },
            Op::Assign if s.assign_op.is_none() => s.uses.first().and_then(|u| t.get(u).cloned()),
            _ => None,
        };
        if let Some(ty) = ty {
            t.insert(d.clone(), ty);
        }
    }
    t
}

pub struct CallResolver<'a> {
    pub hierarchy: Hierarchy<'a>,
    pub dataset: &'a VSinkDataset,
    pub models: &'a [FlowModel],
}

impl<'a> CallResolver<'a> {
    pub fn new(hierarchy: Hierarchy<'a>, dataset: &'a VSinkDataset, models: &'a [FlowModel]) -> Self {
        CallResolver {
            hierarchy,
            dataset,
            models,
        }
    }

    /// The dispatch type of a call: the receiver's inferred type, else the declared class.
    fn receiver_type<'t>(&self, s: &'t Statement, types: &'t HashMap<Var, String>) -> &'t str {
        let declared = &s.call_target.as_ref().expect("call site").class_name;
        s.receiver
            .as_ref()
            .and_then(|r| types.get(r))
            .filter(|t| self.hierarchy.class(t).is_some())
            .unwrap_or(declared)
    }

    /// Declared target plus its resolution against the receiver type.
    pub fn resolve(&self, s: &Statement, types: &HashMap<Var, String>) -> (MethodSig, Option<MethodSig>) {
        let declared = s.call_target.clone().expect("call site");
        let rt = self.receiver_type(s, types);
        let resolved = resolve_virtual(rt, &declared.sub_sig(), &self.hierarchy)
            .sig()
            .cloned();
        (declared, resolved)
    }

    pub fn sink(&self, declared: &MethodSig, resolved: Option<&MethodSig>) -> Option<&'a VSinkEntry> {
        self.dataset
            .sink(declared)
            .or_else(|| resolved.and_then(|r| self.dataset.sink(r)))
    }

    pub fn is_source(&self, declared: &MethodSig, resolved: Option<&MethodSig>) -> bool {
        self.dataset.is_source(declared) || resolved.is_some_and(|r| self.dataset.is_source(r))
    }

    /// Everything a call site can lead to. A sink hit excludes further targets.
    pub fn targets(&self, s: &Statement, types: &HashMap<Var, String>) -> Vec<CallTarget<'a>> {
        let (declared, resolved) = self.resolve(s, types);
        if let Some(e) = self.sink(&declared, resolved.as_ref()) {
            return vec![CallTarget::Sink(e)];
        }
        let mut out = Vec::new();
        if let Some(body) = resolved.as_ref().and_then(|r| self.hierarchy.app_method(r)) {
            out.push(CallTarget::Callee {
                body,
                hop: Hop::Direct,
            });
        }
        let rt = self.receiver_type(s, types);
        let h = &self.hierarchy;
        for fm in self.models {
            if fm.trigger_method != declared.method_name
                || !(h.is_subtype(&declared.class_name, &fm.trigger_class) || h.is_subtype(rt, &fm.trigger_class))
            {
                continue;
            }
            let receiver = s.receiver.iter().map(|r| (r, true));
            let args = s.call_args().iter().map(|a| (a, false));
            for (obj, is_receiver) in receiver.chain(args) {
                let Some(ty) = types.get(obj) else { continue };
                if !h.is_subtype(ty, &fm.target_class) {
                    continue;
                }
                let Some(body) = h
                    .resolve_by_name(ty, &fm.target_method)
                    .filter(|m| h.is_app_class(&m.signature.class_name) && m.has_body())
                else {
                    continue;
                };
                let dup = out.iter().any(|t| matches!(t, CallTarget::Callee { body: b, .. } if b.signature == body.signature));
                if !dup {
                    out.push(CallTarget::Callee {
                        body,
                        hop: Hop::Modeled {
                            object: obj.clone(),
                            positional: is_receiver,
                        },
                    });
                }
            }
        }
        out
    }
}
