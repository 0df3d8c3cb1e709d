//! Backward taint analysis along a call chain, from the sink call back to
//! the entry point, collecting constant, input and VSource evidence.

mod finding;
mod skip;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use finding::{detect, detects, render_finding, sort_findings, Finding, Verdict};
pub use skip::{parse_skip_list, SkipList, SkipRule};

use crate::entry::EntryPoint;
use crate::forward::{CallChain, CallResolver, Hop};
use crate::model::{Literal, MethodBody, MethodSig, Op, Statement, Var};
use crate::vsink::VSinkEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EvidenceKind {
    ConstantValue,
    InputDependence,
    VSourceDependence,
}

impl EvidenceKind {
    pub fn prefix(self) -> &'static str {
        match self {
            EvidenceKind::ConstantValue => "Const:",
            EvidenceKind::InputDependence => "Input:",
            EvidenceKind::VSourceDependence => "VSrc:",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Evidence {
    pub kind: EvidenceKind,
    pub method: MethodSig,
    /// `None` when the evidence is a parameter rather than a statement.
    pub index: Option<usize>,
    pub rendered: String,
    pub value: Option<Literal>,
}

/// Working set of the backward pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaintSet {
    pub vars: BTreeSet<Var>,
    pub params: BTreeSet<usize>,
    pub this: bool,
    /// Fully qualified field names.
    pub fields: BTreeSet<String>,
    pub origins: Vec<Evidence>,
}

impl TaintSet {
    fn add_origin(&mut self, e: Evidence) {
        if !self
            .origins
            .iter()
            .any(|o| o.kind == e.kind && o.method == e.method && o.index == e.index && o.rendered == e.rendered)
        {
            self.origins.push(e);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackwardOutcome {
    pub evidence: Vec<Evidence>,
    /// Chain indices visited, in order.
    pub visited: Vec<usize>,
    /// Initial-phase methods entered through a null-context hop.
    pub lifecycle_hops: Vec<MethodSig>,
    pub notes: Vec<String>,
}

impl BackwardOutcome {
    pub fn has(&self, kind: EvidenceKind) -> bool {
        self.evidence.iter().any(|e| e.kind == kind)
    }
}

/// Argument variables of the sink call that start the analysis.
pub fn seed_taint(sink_call: &Statement, sink: &VSinkEntry, skip: &SkipList) -> BTreeSet<Var> {
    let args = sink_call.call_args();
    if args.is_empty() {
        return sink_call.receiver.iter().cloned().collect();
    }
    args.iter()
        .enumerate()
        .filter(|(i, _)| !skip.skips(&sink.signature, *i))
        .map(|(_, v)| v.clone())
        .collect()
}

pub struct BackwardContext<'a> {
    pub resolver: &'a CallResolver<'a>,
    pub skip: &'a SkipList,
    /// The component is an Activity, so `getIntent()` results are external input.
    pub activity: bool,
}

fn constants(m: &MethodBody) -> HashMap<&Var, &Literal> {
    m.statements
        .iter()
        .filter(|s| s.op == Op::ConstLoad)
        .filter_map(|s| Some((s.def()?, s.const_value.as_ref()?)))
        .collect()
}

/// Short source-like rendering with constant arguments inlined, e.g.
/// `r4 = r2.getStringExtra("referrer")`.
pub fn render_compact(s: &Statement, consts: &HashMap<&Var, &Literal>) -> String {
    let v = |x: &Var| consts.get(x).map_or_else(|| x.to_string(), |l| l.to_string());
    let lhs = s.def().map(|d| format!("{d} = ")).unwrap_or_default();
    match s.op {
        Op::CallSite => {
            let t = s.call_target.as_ref().expect("call site");
            let recv = s
                .receiver
                .as_ref()
                .map_or_else(|| t.simple_class_name().to_string(), |r| r.to_string());
            let args: Vec<String> = s.call_args().iter().map(v).collect();
            format!("{lhs}{recv}.{}({})", t.method_name, args.join(", "))
        }
        Op::ConstLoad => format!("{lhs}{}", s.const_value.as_ref().expect("const")),
        Op::Assign => match &s.assign_op {
            None => format!("{lhs}{}", v(&s.uses[0])),
            Some(op) => format!("{lhs}{op}({})", s.uses.iter().map(v).collect::<Vec<_>>().join(", ")),
        },
        Op::FieldLoad => {
            let f = s.field_ref.as_ref().expect("field");
            let base = s.receiver.as_ref().map_or_else(|| f.class_name.clone(), |b| b.to_string());
            format!("{lhs}{base}.{}", f.name)
        }
        Op::FieldStore => {
            let f = s.field_ref.as_ref().expect("field");
            let base = s.receiver.as_ref().map_or_else(|| f.class_name.clone(), |b| b.to_string());
            format!("{base}.{} = {}", f.name, v(s.stored_value().expect("value")))
        }
        Op::New => format!("{lhs}new {}", s.new_type.as_deref().unwrap_or("?")),
        _ => crate::model::ir::render_statement(s),
    }
}

struct MethodWalk<'m> {
    method: &'m MethodBody,
    /// Entry input parameters and the statements that consumed them.
    input_vars: BTreeSet<Var>,
    input_uses: Vec<usize>,
}

impl<'a> BackwardContext<'a> {
    /// Reverse pass over `m.statements[..start]`.
    fn walk(&self, w: &mut MethodWalk, start: usize, ts: &mut TaintSet) {
        let m = w.method;
        let consts = constants(m);
        let types = crate::forward::infer_types(m);
        for s in m.statements[..start].iter().rev() {
            let def_tainted = s.def().is_some_and(|d| ts.vars.contains(d));
            let mut newly: Vec<Var> = Vec::new();
            match s.op {
                Op::Assign if def_tainted => newly.extend(s.uses.iter().cloned()),
                Op::ConstLoad if def_tainted => {
                    let value = s.const_value.clone().expect("const");
                    ts.add_origin(Evidence {
                        kind: EvidenceKind::ConstantValue,
                        method: m.signature.clone(),
                        index: Some(s.index),
                        rendered: format!("{}{} = {}", EvidenceKind::ConstantValue.prefix(), s.def().unwrap(), value),
                        value: Some(value),
                    });
                }
                Op::FieldLoad if def_tainted => {
                    ts.fields.insert(s.field_ref.as_ref().expect("field").qualified());
                }
                Op::FieldStore => {
                    if ts.fields.contains(&s.field_ref.as_ref().expect("field").qualified()) {
                        newly.extend(s.stored_value().cloned());
                    }
                }
                Op::CallSite => {
                    let recv_tainted = s.receiver.as_ref().is_some_and(|r| ts.vars.contains(r));
                    if def_tainted {
                        newly.extend(s.uses.iter().cloned());
                        let (declared, resolved) = self.resolver.resolve(s, &types);
                        let rendered = render_compact(s, &consts);
                        if self.resolver.is_source(&declared, resolved.as_ref()) {
                            ts.add_origin(Evidence {
                                kind: EvidenceKind::VSourceDependence,
                                method: m.signature.clone(),
                                index: Some(s.index),
                                rendered: format!("{}{rendered}", EvidenceKind::VSourceDependence.prefix()),
                                value: None,
                            });
                        }
                        if self.activity && declared.method_name == "getIntent" && declared.param_types.is_empty() {
                            ts.add_origin(Evidence {
                                kind: EvidenceKind::InputDependence,
                                method: m.signature.clone(),
                                index: Some(s.index),
                                rendered: format!("{}{rendered}", EvidenceKind::InputDependence.prefix()),
                                value: None,
                            });
                        }
                    } else if recv_tainted {
                        newly.extend(s.call_args().iter().cloned());
                    }
                }
                _ => {}
            }
            if newly.iter().any(|v| w.input_vars.contains(v)) {
                w.input_uses.push(s.index);
            }
            ts.vars.extend(newly);
        }
    }

    /// Walk the chain backwards from its sink call.
    pub fn backward_analyze(
        &self,
        chain: &CallChain,
        sink: &VSinkEntry,
        entry: &EntryPoint,
        initial: &[MethodSig],
    ) -> BackwardOutcome {
        let mut out = BackwardOutcome::default();
        let mut ts = TaintSet::default();
        let h = &self.resolver.hierarchy;
        let last = chain.steps.len() - 1;
        for i in (0..=last).rev() {
            let step = &chain.steps[i];
            let Some(m) = h.method(&step.method).filter(|m| m.has_body()) else {
                out.notes.push(format!("Truncated: no body for {}", step.method));
                break;
            };
            out.visited.push(i);
            if i == last {
                let Some(call) = m.statements.get(step.call_site).filter(|s| s.is_call()) else {
                    out.notes.push(format!("Truncated: no call at {} in {}", step.call_site, step.method));
                    break;
                };
                ts.vars = seed_taint(call, sink, self.skip);
            }
            let input_vars: BTreeSet<Var> = if i == 0 && entry.accepts_attack_input {
                entry.input_params.iter().filter_map(|&p| m.params.get(p).cloned()).collect()
            } else {
                BTreeSet::new()
            };
            let mut w = MethodWalk {
                method: m,
                input_vars,
                input_uses: Vec::new(),
            };
            self.walk(&mut w, step.call_site, &mut ts);
            ts.params = m
                .params
                .iter()
                .enumerate()
                .filter(|(_, v)| ts.vars.contains(v))
                .map(|(p, _)| p)
                .collect();
            ts.this = m.this_var.as_ref().is_some_and(|t| ts.vars.contains(t));
            if i == 0 {
                self.input_evidence(&w, entry, &mut ts);
                break;
            }
            if ts.params.is_empty() && !ts.this && ts.fields.is_empty() {
                break;
            }
            let caller = &chain.steps[i - 1];
            let Some(cm) = h.method(&caller.method) else {
                out.notes.push(format!("Truncated: no body for {}", caller.method));
                break;
            };
            let Some(call) = cm.statements.get(caller.call_site).filter(|s| s.is_call()) else {
                out.notes.push(format!("Truncated: no call at {} in {}", caller.call_site, caller.method));
                break;
            };
            ts.vars = transform(&ts, call, caller.hop.as_ref().unwrap_or(&Hop::Direct));
        }
        if out.visited.last() == Some(&0) && !ts.fields.is_empty() {
            for sig in initial {
                let Some(m) = h.method(sig).filter(|m| m.has_body()) else { continue };
                ts.vars.clear();
                let mut w = MethodWalk {
                    method: m,
                    input_vars: BTreeSet::new(),
                    input_uses: Vec::new(),
                };
                self.walk(&mut w, m.statements.len(), &mut ts);
                out.lifecycle_hops.push(sig.clone());
            }
        }
        out.evidence = ts.origins;
        out
    }

    fn input_evidence(&self, w: &MethodWalk, entry: &EntryPoint, ts: &mut TaintSet) {
        let m = w.method;
        let tainted_inputs: Vec<(usize, &Var)> = entry
            .input_params
            .iter()
            .filter_map(|&p| m.params.get(p).map(|v| (p, v)))
            .filter(|(_, v)| ts.vars.contains(*v))
            .collect();
        if tainted_inputs.is_empty() {
            return;
        }
        let consts = constants(m);
        let mut uses = w.input_uses.clone();
        uses.sort_unstable();
        uses.dedup();
        let mut covered = BTreeSet::new();
        for idx in uses {
            let s = &m.statements[idx];
            covered.extend(s.uses.iter().filter(|u| w.input_vars.contains(*u)).cloned());
            ts.add_origin(Evidence {
                kind: EvidenceKind::InputDependence,
                method: m.signature.clone(),
                index: Some(idx),
                rendered: format!("{}{}", EvidenceKind::InputDependence.prefix(), render_compact(s, &consts)),
                value: None,
            });
        }
        for (p, v) in tainted_inputs {
            if covered.contains(v) {
                continue;
            }
            ts.add_origin(Evidence {
                kind: EvidenceKind::InputDependence,
                method: m.signature.clone(),
                index: None,
                rendered: format!("{}{v} = @parameter{p}: {}", EvidenceKind::InputDependence.prefix(), m.signature.param_types[p]),
                value: None,
            });
        }
    }
}

/// Map the callee's tainted parameters and receiver onto the caller's variables.
fn transform(ts: &TaintSet, call: &Statement, hop: &Hop) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    let args = call.call_args();
    match hop {
        Hop::Direct => {
            out.extend(ts.params.iter().filter_map(|&p| args.get(p).cloned()));
            if ts.this {
                out.extend(call.receiver.clone());
            }
        }
        Hop::Modeled { object, positional } => {
            if *positional {
                out.extend(ts.params.iter().filter_map(|&p| args.get(p).cloned()));
            }
            if ts.this {
                out.insert(object.clone());
            }
        }
    }
    out
}
