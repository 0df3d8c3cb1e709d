//! Random program generators and independent oracles shared by the
//! acceptance target and the property tests. The oracles work on the
//! generators' own description of a program, never on the analyzer's IR.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::path::{Path, PathBuf};

use ecv_core::backward::{BackwardContext, Evidence, EvidenceKind, Finding, Verdict};
use ecv_core::data::AnalysisData;
use ecv_core::entry::{locate_entries, EntryPoint};
use ecv_core::filter::FilterPattern;
use ecv_core::forward::{forward_analyze, AnalysisBudget, CallChain, CallResolver, ChainStep, ForwardContext, SinkSite};
use ecv_core::manifest::determine_exposed;
use ecv_core::model::ir::parse_classes;
use ecv_core::model::{AppBundle, ComponentDecl, ComponentKind, Hierarchy, MethodSig};
use ecv_core::vsink::{Category, VSinkEntry};
use rand::seq::SliceRandom;
use rand::Rng;

pub const LOG_D: &str = "<android.util.Log: int d(java.lang.String,java.lang.String)>";
pub const CONNECT: &str = "<java.net.HttpURLConnection: void connect()>";
pub const EXEC: &str = "<java.lang.Runtime: java.lang.Process exec(java.lang.String)>";
const RUNTIME: &str = "<java.lang.Runtime: java.lang.Runtime getRuntime()>";
const APPEND: &str = "<java.lang.StringBuilder: java.lang.StringBuilder append(java.lang.String)>";
const VALUE_OF: &str = "<java.lang.String: java.lang.String valueOf(java.lang.Object)>";
const EXTRA: &str = "<android.content.Intent: java.lang.String getStringExtra(java.lang.String)>";
const LOCATION: &str = "<android.location.LocationManager: android.location.Location getLastKnownLocation(java.lang.String)>";
const DEVICE_ID: &str = "<android.telephony.TelephonyManager: java.lang.String getDeviceId()>";
const SMS: &str = "<android.telephony.SmsManager: void sendTextMessage(java.lang.String,java.lang.String,java.lang.String,android.app.PendingIntent,android.app.PendingIntent)>";
const SMS_DEFAULT: &str = "<android.telephony.SmsManager: android.telephony.SmsManager getDefault()>";

pub const RX_ON_RECEIVE: &str = "<t.Rx: void onReceive(android.content.Context,android.content.Intent)>";
pub const SVC_ON_START: &str = "<t.Svc: int onStartCommand(android.content.Intent,int,int)>";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn exported(name: &str, kind: ComponentKind) -> ComponentDecl {
    ComponentDecl {
        exported: Some(true),
        ..ComponentDecl::new(name, kind)
    }
}

pub fn bundle_from_ir(package: &str, ir: &str, components: Vec<ComponentDecl>) -> AppBundle {
    AppBundle {
        package_name: package.into(),
        components,
        classes: parse_classes(ir, "gen.ir").unwrap_or_else(|e| panic!("{e}\n{ir}")),
        permissions_declared: BTreeMap::new(),
    }
}

fn entries(bundle: &AppBundle) -> Vec<EntryPoint> {
    let verdicts: Vec<_> = bundle
        .components
        .iter()
        .map(|c| determine_exposed(c, &BTreeMap::new()))
        .collect();
    locate_entries(bundle, &verdicts)
}

/// Numbered statement writer with fresh variables.
struct Body {
    lines: Vec<String>,
    next_var: usize,
}

impl Body {
    fn new() -> Self {
        Body {
            lines: Vec::new(),
            next_var: 10,
        }
    }

    fn var(&mut self) -> String {
        self.next_var += 1;
        format!("r{}", self.next_var)
    }

    fn stmt(&mut self, s: String) -> usize {
        let i = self.lines.len();
        self.lines.push(format!("  {i}: {s}"));
        i
    }

    fn render(&self, header: &str, preamble: &[String]) -> String {
        let mut out = format!("{header}\n");
        for p in preamble {
            out.push_str(&format!("  {p}\n"));
        }
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Reachability bundles

#[derive(Debug, Clone, Copy)]
enum Helper {
    Static,
    Instance { overridden: bool },
}

pub struct ReachCase {
    pub bundle: AppBundle,
    pub ir: String,
    /// `(entry, method, statement)` of every sink call reachable within the cap.
    pub expected: BTreeSet<(String, String, usize)>,
}

/// Random bundle of at most `max_methods` methods: two entry callbacks and
/// static or virtual helpers calling each other (cycles allowed) and sinks.
pub fn gen_reach_case<R: Rng>(rng: &mut R, max_methods: usize, depth_cap: usize) -> ReachCase {
    let mut helpers = Vec::new();
    let mut budget = max_methods - 2;
    let n = rng.gen_range(1..=budget.min(12));
    for _ in 0..n {
        if budget == 0 {
            break;
        }
        budget -= 1;
        if rng.gen_bool(0.4) {
            helpers.push(Helper::Static);
        } else {
            let overridden = budget > 0 && rng.gen_bool(0.4);
            if overridden {
                budget -= 1;
            }
            helpers.push(Helper::Instance { overridden });
        }
    }
    let helper_sig = |j: usize, class: &str| format!("<{class}: void h{j}()>");

    // (sig, header, preamble) per method
    let mut methods: Vec<(String, String, Vec<String>)> = vec![
        (
            RX_ON_RECEIVE.into(),
            "method void onReceive(android.content.Context,android.content.Intent)".into(),
            vec!["this r0".into(), "params r1 r2".into()],
        ),
        (
            SVC_ON_START.into(),
            "method int onStartCommand(android.content.Intent,int,int)".into(),
            vec!["this r0".into(), "params r1 r2 r3".into()],
        ),
    ];
    let mut class_of = vec!["t.Rx".to_string(), "t.Svc".to_string()];
    for (j, h) in helpers.iter().enumerate() {
        match h {
            Helper::Static => {
                methods.push((helper_sig(j, "t.Util"), format!("method void h{j}()"), vec![]));
                class_of.push("t.Util".into());
            }
            Helper::Instance { overridden } => {
                methods.push((helper_sig(j, "t.Base"), format!("method void h{j}()"), vec!["this r0".into()]));
                class_of.push("t.Base".into());
                if *overridden {
                    methods.push((helper_sig(j, "t.Sub"), format!("method void h{j}()"), vec!["this r0".into()]));
                    class_of.push("t.Sub".into());
                }
            }
        }
    }

    let mut edges: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut sites: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut text_by_class: BTreeMap<String, String> = BTreeMap::new();
    for (k, (sig, header, preamble)) in methods.iter().enumerate() {
        let mut b = Body::new();
        let ops = rng.gen_range(0..=6);
        for _ in 0..ops {
            let roll: f64 = rng.gen();
            if roll < 0.5 {
                let j = rng.gen_range(0..helpers.len());
                match helpers[j] {
                    Helper::Static => {
                        b.stmt(format!("call {}()", helper_sig(j, "t.Util")));
                        edges.entry(sig.clone()).or_default().insert(helper_sig(j, "t.Util"));
                    }
                    Helper::Instance { overridden } => {
                        let via_sub = rng.gen_bool(0.5);
                        let r = b.var();
                        b.stmt(format!("{r} = new {}", if via_sub { "t.Sub" } else { "t.Base" }));
                        b.stmt(format!("call {r}.{}()", helper_sig(j, "t.Base")));
                        let target = if via_sub && overridden { "t.Sub" } else { "t.Base" };
                        edges.entry(sig.clone()).or_default().insert(helper_sig(j, target));
                    }
                }
            } else if roll < 0.75 {
                let idx = match rng.gen_range(0..3) {
                    0 => {
                        let (a, c, d) = (b.var(), b.var(), b.var());
                        b.stmt(format!("{a} = const \"t\""));
                        b.stmt(format!("{c} = const \"m\""));
                        b.stmt(format!("{d} = call {LOG_D}({a}, {c})"))
                    }
                    1 => {
                        let a = b.var();
                        b.stmt(format!("{a} = new java.net.HttpURLConnection"));
                        b.stmt(format!("call {a}.{CONNECT}()"))
                    }
                    _ => {
                        let (a, c, d) = (b.var(), b.var(), b.var());
                        b.stmt(format!("{a} = call {RUNTIME}()"));
                        b.stmt(format!("{c} = const \"ls\""));
                        b.stmt(format!("{d} = call {a}.{EXEC}({c})"))
                    }
                };
                sites.entry(sig.clone()).or_default().push(idx);
            } else {
                let (a, c) = (b.var(), b.var());
                b.stmt(format!("{a} = const 1"));
                b.stmt(format!("{c} = call {VALUE_OF}({a})"));
            }
        }
        if sig == SVC_ON_START {
            let r = b.var();
            b.stmt(format!("{r} = const 0"));
            b.stmt(format!("return {r}"));
        } else {
            b.stmt("return".into());
        }
        text_by_class
            .entry(class_of[k].clone())
            .or_default()
            .push_str(&b.render(header, preamble));
    }

    let mut ir = String::new();
    for (class, header) in [
        ("t.Rx", "class t.Rx extends android.content.BroadcastReceiver"),
        ("t.Svc", "class t.Svc extends android.app.Service"),
        ("t.Util", "class t.Util extends java.lang.Object"),
        ("t.Base", "class t.Base extends java.lang.Object"),
        ("t.Sub", "class t.Sub extends t.Base"),
    ] {
        ir.push_str(header);
        ir.push('\n');
        if let Some(t) = text_by_class.get(class) {
            ir.push_str(t);
        }
    }

    let mut expected = BTreeSet::new();
    for entry in [RX_ON_RECEIVE, SVC_ON_START] {
        // BFS distance in edges from the entry
        let mut dist: BTreeMap<&str, usize> = BTreeMap::from([(entry, 0)]);
        let mut queue = VecDeque::from([entry]);
        while let Some(m) = queue.pop_front() {
            let d = dist[m];
            if d + 1 >= depth_cap {
                continue;
            }
            for callee in edges.get(m).into_iter().flatten() {
                if !dist.contains_key(callee.as_str()) {
                    dist.insert(callee, d + 1);
                    queue.push_back(callee);
                }
            }
        }
        for m in dist.keys() {
            for &i in sites.get(*m).into_iter().flatten() {
                expected.insert((entry.to_string(), m.to_string(), i));
            }
        }
    }

    let bundle = bundle_from_ir(
        "t",
        &ir,
        vec![exported("t.Rx", ComponentKind::Receiver), exported("t.Svc", ComponentKind::Service)],
    );
    ReachCase { bundle, ir, expected }
}

/// `(entry, method, statement)` of every sink site the forward engine reports.
pub fn forward_sites(bundle: &AppBundle, data: &AnalysisData) -> BTreeSet<(String, String, usize)> {
    let resolver = CallResolver::new(Hierarchy::new(bundle, &data.framework), &data.dataset, &data.flow_models);
    let cx = ForwardContext::new(&resolver, &data.system_broadcasts, AnalysisBudget::default());
    let mut out = BTreeSet::new();
    for e in entries(bundle) {
        let fwd = forward_analyze(&e, &cx, None);
        for site in fwd.sites.keys() {
            out.insert((e.method.to_string(), site.method.to_string(), site.index));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Single-chain programs

#[derive(Debug, Clone)]
enum G {
    Const(String, String),
    Copy(String, String),
    BinOp(String, String, String),
    New(String, String),
    Load(String, usize),
    Store(usize, String),
    Call {
        def: Option<String>,
        recv: Option<String>,
        sig: &'static str,
        args: Vec<String>,
        source: bool,
    },
}

#[derive(Debug, Clone)]
struct GMethod {
    name: String,
    this: Option<String>,
    params: Vec<String>,
    body: Vec<G>,
    /// Receiver and arguments of the call ending the method's slice.
    exit_recv: Option<String>,
    exit_args: Vec<String>,
    /// Variables the sink seeds; only on the last method.
    seeds: Vec<String>,
    exit_text: Vec<String>,
}

impl GMethod {
    fn sig(&self) -> String {
        if self.name == "onReceive" {
            return RX_ON_RECEIVE.into();
        }
        format!("<t.Rx: void {}({})>", self.name, vec!["java.lang.String"; self.params.len()].join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvidenceSets {
    pub consts: BTreeSet<(String, usize)>,
    pub vsrcs: BTreeSet<(String, usize)>,
    pub input: bool,
}

impl EvidenceSets {
    pub fn from_evidence(ev: &[Evidence]) -> Self {
        let mut out = EvidenceSets::default();
        for e in ev {
            match e.kind {
                EvidenceKind::ConstantValue => {
                    out.consts.insert((e.method.to_string(), e.index.unwrap_or(usize::MAX)));
                }
                EvidenceKind::VSourceDependence => {
                    out.vsrcs.insert((e.method.to_string(), e.index.unwrap_or(usize::MAX)));
                }
                EvidenceKind::InputDependence => out.input = true,
            }
        }
        out
    }
}

pub struct ChainCase {
    pub bundle: AppBundle,
    pub ir: String,
    pub sink: &'static str,
    pub expected: EvidenceSets,
}

fn field(k: usize) -> String {
    format!("<t.Rx: java.lang.String f{k}>")
}

fn gen_body<R: Rng>(rng: &mut R, m: &mut GMethod, b: &mut Body, max: usize) -> Vec<String> {
    let mut avail: Vec<String> = m.this.iter().chain(&m.params).cloned().collect();
    let n = rng.gen_range(0..=max);
    for _ in 0..n {
        if avail.is_empty() {
            let x = b.var();
            m.body.push(G::Const(x.clone(), "\"seed\"".into()));
            avail.push(x);
            continue;
        }
        let pick = |rng: &mut R, avail: &[String]| avail.choose(rng).unwrap().clone();
        let g = match rng.gen_range(0..12) {
            0 | 1 => {
                let lit = if rng.gen_bool(0.5) {
                    format!("\"c{}\"", rng.gen_range(0..100))
                } else {
                    rng.gen_range(0..100).to_string()
                };
                G::Const(b.var(), lit)
            }
            2 => G::Copy(b.var(), pick(rng, &avail)),
            3 => G::BinOp(b.var(), pick(rng, &avail), pick(rng, &avail)),
            4 => G::New(b.var(), "java.lang.StringBuilder".into()),
            5 => G::Load(b.var(), rng.gen_range(0..3)),
            6 => G::Store(rng.gen_range(0..3), pick(rng, &avail)),
            7 => G::Call {
                def: rng.gen_bool(0.5).then(|| b.var()),
                recv: Some(pick(rng, &avail)),
                sig: APPEND,
                args: vec![pick(rng, &avail)],
                source: false,
            },
            8 => G::Call {
                def: Some(b.var()),
                recv: None,
                sig: VALUE_OF,
                args: vec![pick(rng, &avail)],
                source: false,
            },
            9 => G::Call {
                def: Some(b.var()),
                recv: Some(pick(rng, &avail)),
                sig: EXTRA,
                args: vec![pick(rng, &avail)],
                source: false,
            },
            10 => G::Call {
                def: Some(b.var()),
                recv: Some(pick(rng, &avail)),
                sig: LOCATION,
                args: vec![pick(rng, &avail)],
                source: true,
            },
            _ => G::Call {
                def: Some(b.var()),
                recv: Some(pick(rng, &avail)),
                sig: DEVICE_ID,
                args: vec![],
                source: true,
            },
        };
        match &g {
            G::Const(d, _) | G::Copy(d, _) | G::BinOp(d, _, _) | G::New(d, _) | G::Load(d, _) => avail.push(d.clone()),
            G::Call { def: Some(d), .. } => avail.push(d.clone()),
            _ => {}
        }
        m.body.push(g);
    }
    if avail.is_empty() {
        let x = b.var();
        m.body.push(G::Const(x.clone(), "\"seed\"".into()));
        avail.push(x);
    }
    avail
}

fn render_g(g: &G, this: Option<&str>) -> String {
    let field_base = this.map(|t| format!("{t}.")).unwrap_or_default();
    match g {
        G::Const(d, lit) => format!("{d} = const {lit}"),
        G::Copy(d, s) => format!("{d} = {s}"),
        G::BinOp(d, a, c) => format!("{d} = add({a}, {c})"),
        G::New(d, t) => format!("{d} = new {t}"),
        G::Load(d, k) => format!("{d} = load {field_base}{}", field(*k)),
        G::Store(k, v) => format!("store {field_base}{} = {v}", field(*k)),
        G::Call { def, recv, sig, args, .. } => format!(
            "{}call {}{sig}({})",
            def.as_ref().map(|d| format!("{d} = ")).unwrap_or_default(),
            recv.as_ref().map(|r| format!("{r}.")).unwrap_or_default(),
            args.join(", ")
        ),
    }
}

/// Random call chain `onReceive -> m1 -> ... -> mk -> sink` of at most
/// `max_methods` methods and `max_stmts` statements per method.
pub fn gen_chain_case<R: Rng>(rng: &mut R, max_methods: usize, max_stmts: usize) -> ChainCase {
    let k = rng.gen_range(1..=max_methods);
    let mut methods: Vec<GMethod> = Vec::new();
    for i in 0..k {
        let (name, this, params) = if i == 0 {
            ("onReceive".to_string(), Some("r0".to_string()), vec!["r1".to_string(), "r2".to_string()])
        } else {
            let p = rng.gen_range(0..=3);
            let this = rng.gen_bool(0.7).then(|| "r0".to_string());
            (format!("m{i}"), this, (1..=p).map(|j| format!("r{j}")).collect())
        };
        methods.push(GMethod {
            name,
            this,
            params,
            body: Vec::new(),
            exit_recv: None,
            exit_args: Vec::new(),
            seeds: Vec::new(),
            exit_text: Vec::new(),
        });
    }
    let sink = [LOG_D, CONNECT, EXEC][rng.gen_range(0..3)];
    let mut ir = String::from(
        "class t.Rx extends android.content.BroadcastReceiver\nfield java.lang.String f0\nfield java.lang.String f1\nfield java.lang.String f2\n",
    );
    for i in 0..k {
        let mut b = Body::new();
        let mut m = methods[i].clone();
        // room for the exit call, its setup and the return
        let avail = gen_body(rng, &mut m, &mut b, max_stmts - 4);
        let pick = |rng: &mut R| avail.choose(rng).unwrap().clone();
        let mut exit = Vec::new();
        if i + 1 < k {
            let callee = &methods[i + 1];
            let args: Vec<String> = (0..callee.params.len()).map(|_| pick(rng)).collect();
            let recv = match (&callee.this, &m.this) {
                (None, _) => None,
                (Some(_), Some(t)) if rng.gen_bool(0.7) => Some(t.clone()),
                (Some(_), _) => {
                    let r = b.var();
                    exit.push(format!("{r} = new t.Rx"));
                    Some(r)
                }
            };
            exit.push(format!(
                "call {}{}({})",
                recv.as_ref().map(|r| format!("{r}.")).unwrap_or_default(),
                callee.sig(),
                args.join(", ")
            ));
            m.exit_recv = recv;
            m.exit_args = args;
        } else {
            match sink {
                s if s == LOG_D => {
                    let (a, c) = (pick(rng), pick(rng));
                    exit.push(format!("{} = call {LOG_D}({a}, {c})", b.var()));
                    m.seeds = vec![c];
                }
                s if s == CONNECT => {
                    let r = pick(rng);
                    exit.push(format!("call {r}.{CONNECT}()"));
                    m.seeds = vec![r];
                }
                _ => {
                    let (r, a) = (pick(rng), pick(rng));
                    exit.push(format!("{} = call {r}.{EXEC}({a})", b.var()));
                    m.seeds = vec![a];
                }
            }
        }
        for g in &m.body {
            b.stmt(render_g(g, m.this.as_deref()));
        }
        // a `new t.Rx` receiver belongs to the body prefix
        if exit.len() == 2 {
            let r = m.exit_recv.clone().unwrap();
            m.body.push(G::New(r, "t.Rx".into()));
        }
        for e in &exit {
            b.stmt(e.clone());
        }
        b.stmt("return".into());
        m.exit_text = exit;
        let header = format!(
            "method void {}({})",
            m.name,
            if i == 0 {
                "android.content.Context,android.content.Intent".to_string()
            } else {
                vec!["java.lang.String"; m.params.len()].join(",")
            }
        );
        let mut pre = Vec::new();
        if let Some(t) = &m.this {
            pre.push(format!("this {t}"));
        }
        if !m.params.is_empty() {
            pre.push(format!("params {}", m.params.join(" ")));
        }
        ir.push_str(&b.render(&header, &pre));
        methods[i] = m;
    }
    let expected = chain_oracle(&methods);
    let bundle = bundle_from_ir("t", &ir, vec![exported("t.Rx", ComponentKind::Receiver)]);
    ChainCase {
        bundle,
        ir,
        sink,
        expected,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Label {
    Const(String, usize),
    VSrc(String, usize),
    Input,
}

/// Forward def-use propagation along the chain in execution order.
fn chain_oracle(methods: &[GMethod]) -> EvidenceSets {
    type Labels = BTreeSet<Label>;
    let mut fields: BTreeMap<usize, Labels> = BTreeMap::new();
    let mut incoming: BTreeMap<String, Labels> = BTreeMap::from([("r2".to_string(), Labels::from([Label::Input]))]);
    let mut result = Labels::new();
    for (i, m) in methods.iter().enumerate() {
        let sig = m.sig();
        let mut lab: BTreeMap<String, Labels> = std::mem::take(&mut incoming);
        let get = |lab: &BTreeMap<String, Labels>, v: &str| lab.get(v).cloned().unwrap_or_default();
        for (idx, g) in m.body.iter().enumerate() {
            match g {
                G::Const(d, _) => {
                    lab.insert(d.clone(), Labels::from([Label::Const(sig.clone(), idx)]));
                }
                G::Copy(d, s) => {
                    let l = get(&lab, s);
                    lab.insert(d.clone(), l);
                }
                G::BinOp(d, a, c) => {
                    let mut l = get(&lab, a);
                    l.extend(get(&lab, c));
                    lab.insert(d.clone(), l);
                }
                G::New(d, _) => {
                    lab.insert(d.clone(), Labels::new());
                }
                G::Load(d, k) => {
                    let l = fields.get(k).cloned().unwrap_or_default();
                    lab.insert(d.clone(), l);
                }
                G::Store(k, v) => {
                    let l = get(&lab, v);
                    fields.entry(*k).or_default().extend(l);
                }
                G::Call { def, recv, args, source, .. } => {
                    let mut arg_labels = Labels::new();
                    for a in args {
                        arg_labels.extend(get(&lab, a));
                    }
                    if let Some(d) = def {
                        let mut l = arg_labels.clone();
                        if let Some(r) = recv {
                            l.extend(get(&lab, r));
                        }
                        if *source {
                            l.insert(Label::VSrc(sig.clone(), idx));
                        }
                        lab.insert(d.clone(), l);
                    }
                    if let Some(r) = recv {
                        lab.entry(r.clone()).or_default().extend(arg_labels);
                    }
                }
            }
        }
        if i + 1 < methods.len() {
            let callee = &methods[i + 1];
            for (p, a) in callee.params.iter().zip(&m.exit_args) {
                incoming.insert(p.clone(), get(&lab, a));
            }
            if let (Some(t), Some(r)) = (&callee.this, &m.exit_recv) {
                incoming.insert(t.clone(), get(&lab, r));
            }
        } else {
            for s in &m.seeds {
                result.extend(get(&lab, s));
            }
        }
    }
    let mut out = EvidenceSets::default();
    for l in result {
        match l {
            Label::Const(m, i) => {
                out.consts.insert((m, i));
            }
            Label::VSrc(m, i) => {
                out.vsrcs.insert((m, i));
            }
            Label::Input => out.input = true,
        }
    }
    out
}

/// Run the forward engine for the chain, then the backward engine on its
/// single reached sink.
pub fn analyze_chain(case: &ChainCase, data: &AnalysisData) -> Result<EvidenceSets, String> {
    let resolver = CallResolver::new(Hierarchy::new(&case.bundle, &data.framework), &data.dataset, &data.flow_models);
    let cx = ForwardContext::new(&resolver, &data.system_broadcasts, AnalysisBudget::default());
    let entry = entries(&case.bundle)
        .into_iter()
        .find(|e| e.method.to_string() == RX_ON_RECEIVE)
        .ok_or("no onReceive entry")?;
    let fwd = forward_analyze(&entry, &cx, None);
    let [reached] = fwd.reached.as_slice() else {
        return Err(format!("expected one reached sink, got {}", fwd.reached.len()));
    };
    if reached.sink.signature.to_string() != case.sink {
        return Err(format!("reached {} instead of {}", reached.sink.signature, case.sink));
    }
    let bx = BackwardContext {
        resolver: &resolver,
        skip: &data.skip,
        activity: false,
    };
    let out = bx.backward_analyze(&reached.chain, &reached.sink, &entry, &[]);
    Ok(EvidenceSets::from_evidence(&out.evidence))
}

// ---------------------------------------------------------------------------
// Findings for filter properties

const FRAGMENTS: [&str; 6] = ["content://com.own", "content://other", "DROP TABLE ", "pm uninstall ", "getDeviceId", "x"];

pub fn gen_finding<R: Rng>(rng: &mut R, n: usize) -> Finding {
    let categories = [Category::Direct, Category::DirectByParam, Category::Input, Category::Public];
    let category = *categories.choose(rng).unwrap();
    let method = MethodSig::new("t.A", "void", "run", &[]);
    let sink_sig = MethodSig::new("t.S", "void", "sink", &["java.lang.String"]);
    let evidence = (0..rng.gen_range(0..4))
        .map(|i| {
            let kind = [EvidenceKind::ConstantValue, EvidenceKind::InputDependence, EvidenceKind::VSourceDependence]
                [rng.gen_range(0..3)];
            Evidence {
                kind,
                method: method.clone(),
                index: Some(i),
                rendered: format!("{}r{i} = \"{}\"", kind.prefix(), FRAGMENTS.choose(rng).unwrap()),
                value: None,
            }
        })
        .collect();
    let chain = CallChain {
        steps: vec![ChainStep {
            method: method.clone(),
            call_site: 0,
            call_string: String::new(),
            hop: None,
        }],
        terminal_sink: Some(sink_sig.clone()),
    };
    Finding {
        app: format!("app{n}"),
        component: "t.A".into(),
        kind: ComponentKind::Service,
        entry: method.clone(),
        chain,
        sink: VSinkEntry {
            signature: sink_sig,
            category,
            origin_rule: None,
            permissions: Vec::new(),
        },
        site: SinkSite { method, index: n },
        category,
        evidence,
        verdict: Verdict::Potential,
        filtered_by: Vec::new(),
        partial: false,
        notes: Vec::new(),
    }
}

pub fn gen_pattern<R: Rng>(rng: &mut R, n: usize) -> FilterPattern {
    let applies = match rng.gen_range(0..3) {
        0 => vec![Category::DirectByParam],
        1 => vec![Category::Input],
        _ => vec![Category::DirectByParam, Category::Input],
    };
    let prefix = ["Const:", "Input:", "VSrc:", ""][rng.gen_range(0..4)];
    let frag = regex::escape(FRAGMENTS.choose(rng).unwrap());
    FilterPattern {
        id: format!("p{n}"),
        applies_to: applies,
        regex: regex::Regex::new(&format!("{prefix}.*{frag}")).unwrap(),
        note: String::new(),
    }
}

pub fn demoted_keys(findings: &[Finding]) -> HashSet<(String, usize)> {
    findings
        .iter()
        .filter(|f| f.verdict == Verdict::FilteredFalsePositive)
        .map(|f| (f.app.clone(), f.site.index))
        .collect()
}

// ---------------------------------------------------------------------------
// Pathological lattice

/// Receiver whose guarded branch enters a `layers`-deep diamond lattice
/// ending in an SMS send; the unguarded path sends one SMS directly.
pub fn lattice_bundle(layers: usize) -> AppBundle {
    let mut ir = String::from("class t.Lattice extends android.content.BroadcastReceiver\n");
    ir.push_str(&format!(
        "method void onReceive(android.content.Context,android.content.Intent)\n  this r0\n  params r1 r2\n\
  0: r3 = call {SMS_DEFAULT}()\n\
  1: r4 = const \"5554\"\n\
  2: r5 = const 0\n\
  3: call r3.{SMS}(r4, r5, r4, r5, r5)\n\
  4: r6 = call r2.<android.content.Intent: java.lang.String getAction()>()\n\
  5: r7 = const \"android.intent.action.BOOT_COMPLETED\"\n\
  6: z0 = call r6.<java.lang.String: boolean equals(java.lang.Object)>(r7)\n\
  7: if z0 goto 8 else 10\n\
  8: call r0.<t.Lattice: void a0()>()\n\
  9: goto 10\n\
  10: return\n"
    ));
    for i in 0..layers {
        for side in ["a", "b"] {
            ir.push_str(&format!("method void {side}{i}()\n  this r0\n"));
            if i + 1 < layers {
                ir.push_str(&format!(
                    "  0: call r0.<t.Lattice: void a{n}()>()\n  1: call r0.<t.Lattice: void b{n}()>()\n  2: return\n",
                    n = i + 1
                ));
            } else {
                ir.push_str(&format!(
                    "  0: r1 = call {SMS_DEFAULT}()\n  1: r2 = const \"5556\"\n  2: r3 = const 0\n  3: call r1.{SMS}(r2, r3, r2, r3, r3)\n  4: return\n"
                ));
            }
        }
    }
    // a0 also enters b0 so both sides of the first layer are used
    let ir = ir.replacen(
        "  8: call r0.<t.Lattice: void a0()>()\n  9: goto 10\n",
        "  8: call r0.<t.Lattice: void a0()>()\n  9: call r0.<t.Lattice: void b0()>()\n",
        1,
    );
    let mut rx = ComponentDecl::new("t.Lattice", ComponentKind::Receiver);
    rx.has_intent_filter = true;
    rx.intent_filter_actions = vec!["android.intent.action.BOOT_COMPLETED".into()];
    bundle_from_ir("t.lattice", &ir, vec![rx])
}
