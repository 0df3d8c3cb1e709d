//! Forward reachability from entry points to VSink call sites.
//!
//! Each entry is explored depth first, one call path at a time. A callee
//! already on the current path is not re-entered and paths are capped at
//! `max_chain_depth` methods. A callee is skipped once every sink site below
//! it holds `max_chains_per_site` chains including an unguarded one; sites
//! only reachable through guarded paths keep being explored. The deadline is
//! checked at every method entry.

mod guard;
mod resolve;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use guard::{load_system_broadcasts, parse_system_broadcasts, validate_broadcast_check, GuardInfo};
pub use resolve::{infer_types, parse_flow_models, CallResolver, CallTarget, FlowModel, Hop};

use crate::entry::EntryPoint;
use crate::model::{build_cfg, ComponentKind, MethodBody, MethodSig, Var};
use crate::vsink::{Category, VSinkEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisBudget {
    pub per_component_timeout: Duration,
    pub max_chain_depth: usize,
    /// Chains kept per sink site; the first unguarded chain is always kept.
    pub max_chains_per_site: usize,
}

impl Default for AnalysisBudget {
    fn default() -> Self {
        AnalysisBudget {
            per_component_timeout: Duration::from_secs(120),
            max_chain_depth: 50,
            max_chains_per_site: 16,
        }
    }
}

/// Where a sink call happens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SinkSite {
    pub method: MethodSig,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainStep {
    pub method: MethodSig,
    /// Call to the next step, or to the sink on the last step.
    pub call_site: usize,
    /// Actual arguments at `call_site`, comma separated.
    pub call_string: String,
    /// `None` on the last step.
    pub hop: Option<Hop>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CallChain {
    pub steps: Vec<ChainStep>,
    pub terminal_sink: Option<MethodSig>,
}

impl CallChain {
    pub fn entry(&self) -> &MethodSig {
        &self.steps[0].method
    }

    pub fn last(&self) -> &ChainStep {
        self.steps.last().expect("non-empty chain")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachedSink {
    pub sink: VSinkEntry,
    pub site: SinkSite,
    pub chain: CallChain,
    pub category: Category,
    pub guarded_by_broadcast_check: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteSummary {
    pub chains_seen: usize,
    pub unguarded_seen: usize,
}

impl SiteSummary {
    /// Every path to the site passes a system-only broadcast check.
    pub fn suppressed(&self) -> bool {
        self.chains_seen > 0 && self.unguarded_seen == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardResult {
    pub reached: Vec<ReachedSink>,
    pub sites: BTreeMap<SinkSite, SiteSummary>,
    pub timed_out: bool,
    pub methods_visited: usize,
    pub depth_cuts: usize,
    /// Callees skipped because every site below them was saturated.
    pub saturated_skips: usize,
}

struct MethodFacts {
    types: HashMap<Var, String>,
    /// Call statement indices in depth-first CFG order.
    calls: Vec<usize>,
}

/// Shared state for analyzing the entries of one component.
pub struct ForwardContext<'a> {
    pub resolver: &'a CallResolver<'a>,
    pub system_broadcasts: &'a HashSet<String>,
    pub budget: AnalysisBudget,
    facts: RefCell<HashMap<MethodSig, Rc<MethodFacts>>>,
    guards: RefCell<HashMap<(MethodSig, usize), Rc<GuardInfo>>>,
    reaches_sink: RefCell<HashMap<MethodSig, bool>>,
    sites_below: RefCell<HashMap<MethodSig, Rc<Vec<SinkSite>>>>,
}

impl<'a> ForwardContext<'a> {
    pub fn new(
        resolver: &'a CallResolver<'a>,
        system_broadcasts: &'a HashSet<String>,
        budget: AnalysisBudget,
    ) -> Self {
        ForwardContext {
            resolver,
            system_broadcasts,
            budget,
            facts: RefCell::default(),
            guards: RefCell::default(),
            reaches_sink: RefCell::default(),
            sites_below: RefCell::default(),
        }
    }

    fn facts(&self, m: &MethodBody) -> Rc<MethodFacts> {
        if let Some(f) = self.facts.borrow().get(&m.signature) {
            return f.clone();
        }
        let calls = match build_cfg(m) {
            Ok(cfg) => cfg
                .dfs_statements()
                .into_iter()
                .filter(|&i| m.statements[i].is_call())
                .collect(),
            Err(e) => {
                log::warn!("{e}");
                Vec::new()
            }
        };
        let f = Rc::new(MethodFacts {
            types: infer_types(m),
            calls,
        });
        self.facts.borrow_mut().insert(m.signature.clone(), f.clone());
        f
    }

    fn guard(&self, m: &MethodBody, intent_pos: usize) -> Rc<GuardInfo> {
        let key = (m.signature.clone(), intent_pos);
        if let Some(g) = self.guards.borrow().get(&key) {
            return g.clone();
        }
        let g = match (build_cfg(m), m.params.get(intent_pos)) {
            (Ok(cfg), Some(v)) => validate_broadcast_check(m, &cfg, v, self.system_broadcasts),
            _ => GuardInfo::default(),
        };
        let g = Rc::new(g);
        self.guards.borrow_mut().insert(key, g.clone());
        g
    }

    fn targets(&self, m: &MethodBody, f: &MethodFacts, idx: usize) -> Vec<CallTarget<'a>> {
        self.resolver.targets(&m.statements[idx], &f.types)
    }

    /// Whether any sink call is transitively reachable from `m`, ignoring
    /// depth and path constraints.
    fn can_reach_sink(&self, m: &'a MethodBody) -> bool {
        if let Some(&b) = self.reaches_sink.borrow().get(&m.signature) {
            return b;
        }
        let mut seen: HashSet<MethodSig> = HashSet::new();
        let mut stack = vec![m];
        let mut found = false;
        while let Some(cur) = stack.pop() {
            if !seen.insert(cur.signature.clone()) {
                continue;
            }
            if let Some(&true) = self.reaches_sink.borrow().get(&cur.signature) {
                found = true;
                break;
            }
            let f = self.facts(cur);
            for &i in &f.calls {
                for t in self.targets(cur, &f, i) {
                    match t {
                        CallTarget::Sink(_) => found = true,
                        CallTarget::Callee { body, .. } => stack.push(body),
                    }
                }
            }
            if found {
                break;
            }
        }
        if !found {
            // Nothing reachable from `m` reaches a sink, so the same holds for all of them.
            let mut memo = self.reaches_sink.borrow_mut();
            for s in seen {
                memo.insert(s, false);
            }
        } else {
            self.reaches_sink.borrow_mut().insert(m.signature.clone(), true);
        }
        found
    }
}

impl<'a> ForwardContext<'a> {
    /// Sink call sites in `m` and everything it transitively calls.
    fn sites_below(&self, m: &'a MethodBody) -> Rc<Vec<SinkSite>> {
        if let Some(s) = self.sites_below.borrow().get(&m.signature) {
            return s.clone();
        }
        let mut seen: HashSet<MethodSig> = HashSet::new();
        let mut stack = vec![m];
        let mut sites = Vec::new();
        while let Some(cur) = stack.pop() {
            if !seen.insert(cur.signature.clone()) {
                continue;
            }
            let f = self.facts(cur);
            for &i in &f.calls {
                for t in self.targets(cur, &f, i) {
                    match t {
                        CallTarget::Sink(_) => sites.push(SinkSite {
                            method: cur.signature.clone(),
                            index: i,
                        }),
                        CallTarget::Callee { body, .. } => stack.push(body),
                    }
                }
            }
        }
        sites.sort();
        sites.dedup();
        let sites = Rc::new(sites);
        self.sites_below.borrow_mut().insert(m.signature.clone(), sites.clone());
        sites
    }
}

struct Walk<'c, 'a> {
    cx: &'c ForwardContext<'a>,
    deadline: Option<Instant>,
    out: ForwardResult,
    path: Vec<ChainStep>,
    on_path: Vec<MethodSig>,
}

impl<'c, 'a> Walk<'c, 'a> {
    fn expired(&mut self) -> bool {
        if !self.out.timed_out && self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.out.timed_out = true;
        }
        self.out.timed_out
    }

    fn record(&mut self, m: &MethodBody, idx: usize, sink: &VSinkEntry, guarded: bool) {
        let stmt = &m.statements[idx];
        let site = SinkSite {
            method: m.signature.clone(),
            index: idx,
        };
        let summary = self.out.sites.entry(site.clone()).or_default();
        let keep = summary.chains_seen < self.cx.budget.max_chains_per_site
            || (!guarded && summary.unguarded_seen == 0);
        summary.chains_seen += 1;
        if !guarded {
            summary.unguarded_seen += 1;
        }
        if !keep {
            return;
        }
        let mut steps = self.path.clone();
        steps.push(ChainStep {
            method: m.signature.clone(),
            call_site: idx,
            call_string: call_string(&stmt.uses[stmt.uses.len() - stmt.call_args().len()..]),
            hop: None,
        });
        self.out.reached.push(ReachedSink {
            sink: sink.clone(),
            site,
            chain: CallChain {
                steps,
                terminal_sink: Some(sink.signature.clone()),
            },
            category: sink.category,
            guarded_by_broadcast_check: guarded,
        });
    }

    /// Every site below `m` already holds its full quota of chains, one of
    /// them unguarded, so no further path through `m` can change the result.
    fn saturated(&self, m: &'a MethodBody) -> bool {
        let cap = self.cx.budget.max_chains_per_site;
        self.cx.sites_below(m).iter().all(|s| {
            self.out
                .sites
                .get(s)
                .is_some_and(|x| x.chains_seen >= cap && x.unguarded_seen > 0)
        })
    }

    fn visit(&mut self, m: &'a MethodBody, intent_pos: Option<usize>, guarded: bool) {
        if self.expired() {
            return;
        }
        self.out.methods_visited += 1;
        let cx = self.cx;
        let facts = cx.facts(m);
        let guard = intent_pos
            .filter(|_| !cx.system_broadcasts.is_empty())
            .map(|p| cx.guard(m, p));
        let intent_var = intent_pos.and_then(|p| m.params.get(p));
        self.on_path.push(m.signature.clone());
        for &idx in &facts.calls {
            if self.out.timed_out {
                break;
            }
            let stmt = &m.statements[idx];
            let site_guarded = guarded || guard.as_ref().is_some_and(|g| g.contains(idx));
            for t in cx.targets(m, &facts, idx) {
                match t {
                    CallTarget::Sink(e) => self.record(m, idx, e, site_guarded),
                    CallTarget::Callee { body, hop } => {
                        if self.on_path.contains(&body.signature) || !cx.can_reach_sink(body) {
                            continue;
                        }
                        if self.saturated(body) {
                            self.out.saturated_skips += 1;
                            continue;
                        }
                        if self.on_path.len() >= cx.budget.max_chain_depth {
                            self.out.depth_cuts += 1;
                            continue;
                        }
                        let callee_intent = match hop {
                            Hop::Direct => intent_var.and_then(|iv| stmt.call_args().iter().position(|a| a == iv)),
                            Hop::Modeled { .. } => None,
                        };
                        self.path.push(ChainStep {
                            method: m.signature.clone(),
                            call_site: idx,
                            call_string: call_string(stmt.call_args()),
                            hop: Some(hop),
                        });
                        self.visit(body, callee_intent, site_guarded);
                        self.path.pop();
                        if self.out.timed_out {
                            break;
                        }
                    }
                }
            }
        }
        self.on_path.pop();
    }
}

fn call_string(args: &[Var]) -> String {
    args.iter().map(Var::as_str).collect::<Vec<_>>().join(",")
}

/// Explore every call path from `entry`. With a `deadline` the walk stops
/// early and flags the result as timed out.
pub fn forward_analyze(
    entry: &EntryPoint,
    cx: &ForwardContext<'_>,
    deadline: Option<Instant>,
) -> ForwardResult {
    let Some(body) = cx.resolver.hierarchy.app_method(&entry.method) else {
        return ForwardResult::default();
    };
    let intent_pos = (entry.kind == ComponentKind::Receiver && entry.method.method_name == "onReceive")
        .then(|| entry.input_params.first().copied())
        .flatten();
    let mut w = Walk {
        cx,
        deadline,
        out: ForwardResult::default(),
        path: Vec::new(),
        on_path: Vec::new(),
    };
    w.visit(body, intent_pos, false);
    w.out
}

/// Check that every step's call site leads to the next step's method.
pub fn validate_chain(chain: &CallChain, resolver: &CallResolver) -> Result<(), String> {
    let h = &resolver.hierarchy;
    let Some(last) = chain.steps.last() else {
        return Err("empty chain".into());
    };
    for (i, pair) in chain.steps.windows(2).enumerate() {
        let (cur, next) = (&pair[0], &pair[1]);
        let m = h.method(&cur.method).ok_or_else(|| format!("step {i}: unknown method {}", cur.method))?;
        let stmt = m
            .statements
            .get(cur.call_site)
            .filter(|s| s.is_call())
            .ok_or_else(|| format!("step {i}: statement {} is not a call", cur.call_site))?;
        let types = infer_types(m);
        let found = resolver.targets(stmt, &types).into_iter().any(|t| {
            matches!(t, CallTarget::Callee { body, hop } if body.signature == next.method && Some(&hop) == cur.hop.as_ref())
        });
        if !found {
            return Err(format!("step {i}: call at {} does not reach {}", cur.call_site, next.method));
        }
    }
    let m = h.method(&last.method).ok_or_else(|| format!("unknown method {}", last.method))?;
    let stmt = m
        .statements
        .get(last.call_site)
        .filter(|s| s.is_call())
        .ok_or_else(|| "sink site is not a call".to_string())?;
    let (declared, resolved) = resolver.resolve(stmt, &infer_types(m));
    match (resolver.sink(&declared, resolved.as_ref()), &chain.terminal_sink) {
        (Some(e), Some(t)) if &e.signature == t => Ok(()),
        _ => Err(format!("last call at {} is not the terminal sink", last.call_site)),
    }
}
