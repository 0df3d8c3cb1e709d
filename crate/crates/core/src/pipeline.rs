//! End-to-end runs: manifest exposure, entry location, forward and backward
//! analysis per component, guided filtering and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backward::{detect, render_finding, sort_findings, BackwardContext, Finding, Verdict};
use crate::data::AnalysisData;
use crate::entry::{locate_entries, plan_lifecycle, EntryPoint};
use crate::error::ModelError;
use crate::filter::{apply_filters, FilterStats};
use crate::forward::{forward_analyze, AnalysisBudget, CallResolver, ForwardContext, ReachedSink};
use crate::manifest::{determine_exposed_with, effective_permissions, ExposureOptions, ExposureReason};
use crate::model::{parse_bundle, AppBundle, ComponentKind, Hierarchy, MANIFEST_FILE};
use crate::vsink::Category;

pub const FINDINGS_LOG: &str = "findings.log";
pub const FINDINGS_JSONL: &str = "findings.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TSV: &str = "report.tsv";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub budget: AnalysisBudget,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
    pub include_activities: bool,
    pub exposure: ExposureOptions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub app: String,
    pub component: String,
    pub kind: ComponentKind,
    pub exposed: bool,
    pub reason: ExposureReason,
    /// False for exposed components that were skipped (activities by default).
    pub analyzed: bool,
    pub entries: usize,
    pub sink_sites: usize,
    pub suppressed_sites: usize,
    pub findings: usize,
    pub timed_out: bool,
    pub methods_visited: usize,
    pub depth_cuts: usize,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRow {
    pub app: String,
    pub path: String,
    /// `ok` or the error kind that stopped the app from being analyzed.
    pub status: String,
    pub error: Option<String>,
    pub components: usize,
    pub exposed: usize,
    pub findings: usize,
    pub demoted: usize,
    pub timed_out: usize,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub apps: usize,
    pub failed_apps: usize,
    pub components: usize,
    pub exposed: usize,
    pub analyzed: usize,
    pub findings: usize,
    pub potential: usize,
    pub demoted: usize,
    pub timed_out_components: usize,
    pub by_category: BTreeMap<Category, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub apps: Vec<AppRow>,
    pub components: Vec<ComponentRow>,
    pub totals: Totals,
    pub filter: FilterStats,
    /// sha256 of each data file used.
    pub datasets: BTreeMap<String, String>,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub findings: Vec<Finding>,
    pub report: RunReport,
}

#[derive(Debug, Clone)]
pub struct ComponentResult {
    pub findings: Vec<Finding>,
    pub row: ComponentRow,
}

/// Bundle directories under `root`: `root` itself if it holds a manifest,
/// otherwise every immediate subdirectory that does, sorted.
pub fn discover_bundles(root: &Path) -> std::io::Result<Vec<PathBuf>> {
    if root.join(MANIFEST_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut out = Vec::new();
    for e in fs::read_dir(root)? {
        let p = e?.path();
        if p.join(MANIFEST_FILE).is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// First unguarded chain per site reaching `detect`, one finding per site.
fn findings_for_entry(
    bundle: &AppBundle,
    entry: &EntryPoint,
    reached: &[ReachedSink],
    sites: &BTreeMap<crate::forward::SinkSite, crate::forward::SiteSummary>,
    bx: &BackwardContext,
    initial: &[crate::model::MethodSig],
) -> Vec<Finding> {
    let mut out = Vec::new();
    for (site, summary) in sites {
        if summary.suppressed() {
            continue;
        }
        let candidates = reached
            .iter()
            .filter(|r| &r.site == site && !r.guarded_by_broadcast_check);
        for r in candidates {
            let (evidence, notes) = if r.category == Category::Direct {
                (Vec::new(), Vec::new())
            } else {
                let o = bx.backward_analyze(&r.chain, &r.sink, entry, initial);
                (o.evidence, o.notes)
            };
            if let Some(f) = detect(
                &bundle.package_name,
                &entry.component,
                entry.kind,
                &r.chain,
                &r.sink,
                site,
                evidence,
                notes,
            ) {
                out.push(f);
                break;
            }
        }
    }
    out
}

/// Analyze one exposed component against its own deadline.
pub fn analyze_component(
    bundle: &AppBundle,
    component: &str,
    entries: &[EntryPoint],
    data: &AnalysisData,
    budget: AnalysisBudget,
) -> ComponentResult {
    let start = Instant::now();
    let deadline = start + budget.per_component_timeout;
    let kind = bundle
        .component(component)
        .map(|c| c.kind)
        .unwrap_or(ComponentKind::Activity);
    let resolver = CallResolver::new(Hierarchy::new(bundle, &data.framework), &data.dataset, &data.flow_models);
    let fx = ForwardContext::new(&resolver, &data.system_broadcasts, budget);
    let bx = BackwardContext {
        resolver: &resolver,
        skip: &data.skip,
        activity: kind == ComponentKind::Activity,
    };
    let plan = plan_lifecycle(bundle, component, entries);
    let mut row = ComponentRow {
        app: bundle.package_name.clone(),
        component: component.to_string(),
        kind,
        exposed: true,
        reason: ExposureReason::ExplicitExported,
        analyzed: true,
        entries: 0,
        sink_sites: 0,
        suppressed_sites: 0,
        findings: 0,
        timed_out: false,
        methods_visited: 0,
        depth_cuts: 0,
        elapsed_ms: 0,
    };
    let mut findings = Vec::new();
    for entry in plan.entries() {
        if Instant::now() >= deadline {
            row.timed_out = true;
            break;
        }
        row.entries += 1;
        let fwd = forward_analyze(entry, &fx, Some(deadline));
        row.timed_out |= fwd.timed_out;
        row.methods_visited += fwd.methods_visited;
        row.depth_cuts += fwd.depth_cuts;
        row.sink_sites += fwd.sites.len();
        row.suppressed_sites += fwd.sites.values().filter(|s| s.suppressed()).count();
        let initial = plan.initial_before(&entry.method);
        findings.extend(findings_for_entry(bundle, entry, &fwd.reached, &fwd.sites, &bx, &initial));
    }
    if row.timed_out {
        log::warn!(
            "{} {component}: timed out after {:?}, results are partial",
            bundle.package_name,
            budget.per_component_timeout
        );
        for f in &mut findings {
            f.partial = true;
        }
    }
    row.findings = findings.len();
    row.elapsed_ms = start.elapsed().as_millis();
    ComponentResult { findings, row }
}

/// Rows for every component of a bundle plus the exposed ones to analyze.
fn plan_bundle(bundle: &AppBundle, data: &AnalysisData, cfg: &RunConfig) -> (Vec<ComponentRow>, Vec<EntryPoint>) {
    let perms = effective_permissions(bundle, &data.permissions);
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for c in &bundle.components {
        let v = determine_exposed_with(c, &perms, cfg.exposure);
        let analyzed = v.exposed && (cfg.include_activities || c.kind != ComponentKind::Activity);
        rows.push(ComponentRow {
            app: bundle.package_name.clone(),
            component: c.name.clone(),
            kind: c.kind,
            exposed: v.exposed,
            reason: v.reason,
            analyzed,
            entries: 0,
            sink_sites: 0,
            suppressed_sites: 0,
            findings: 0,
            timed_out: false,
            methods_visited: 0,
            depth_cuts: 0,
            elapsed_ms: 0,
        });
        if analyzed {
            verdicts.push(v);
        }
    }
    (rows, locate_entries(bundle, &verdicts))
}

/// Analyze loaded bundles. Each `(path, result)` pair becomes one app row;
/// load failures are reported, not fatal.
pub fn run_bundles(
    loaded: Vec<(PathBuf, Result<AppBundle, ModelError>)>,
    data: &AnalysisData,
    cfg: &RunConfig,
) -> RunOutput {
    let start = Instant::now();
    let mut bundles = Vec::new();
    let mut apps = Vec::new();
    for (path, res) in loaded {
        match res {
            Ok(b) => bundles.push((path, b)),
            Err(e) => {
                log::error!("{}: {e}", path.display());
                apps.push(AppRow {
                    app: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                    path: path.display().to_string(),
                    status: e.kind().to_string(),
                    error: Some(e.to_string()),
                    components: 0,
                    exposed: 0,
                    findings: 0,
                    demoted: 0,
                    timed_out: 0,
                    elapsed_ms: 0,
                });
            }
        }
    }

    let mut rows: Vec<Vec<ComponentRow>> = Vec::new();
    let mut tasks: Vec<(usize, usize, Vec<EntryPoint>)> = Vec::new();
    for (bi, (_, b)) in bundles.iter().enumerate() {
        let (r, entries) = plan_bundle(b, data, cfg);
        for (ci, row) in r.iter().enumerate().filter(|(_, r)| r.analyzed) {
            let mine = entries.iter().filter(|e| e.component == row.component).cloned().collect();
            tasks.push((bi, ci, mine));
        }
        rows.push(r);
    }

    let work = || {
        tasks
            .par_iter()
            .map(|(bi, ci, entries)| {
                let b = &bundles[*bi].1;
                let name = &rows[*bi][*ci].component;
                (*bi, *ci, analyze_component(b, name, entries, data, cfg.budget))
            })
            .collect::<Vec<_>>()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build() {
        Ok(pool) => pool.install(work),
        Err(e) => {
            log::warn!("thread pool: {e}; using the global pool");
            work()
        }
    };

    let mut findings = Vec::new();
    for (bi, ci, res) in results {
        let row = &mut rows[bi][ci];
        let (exposed, reason) = (row.exposed, row.reason);
        *row = ComponentRow { exposed, reason, ..res.row };
        findings.extend(res.findings);
    }
    sort_findings(&mut findings);
    let filter = apply_filters(&mut findings, &data.patterns);

    for ((path, b), r) in bundles.iter().zip(&rows) {
        let mine = || findings.iter().filter(|f| f.app == b.package_name);
        apps.push(AppRow {
            app: b.package_name.clone(),
            path: path.display().to_string(),
            status: "ok".into(),
            error: None,
            components: r.len(),
            exposed: r.iter().filter(|c| c.exposed).count(),
            findings: mine().count(),
            demoted: mine().filter(|f| f.verdict == Verdict::FilteredFalsePositive).count(),
            timed_out: r.iter().filter(|c| c.timed_out).count(),
            elapsed_ms: r.iter().map(|c| c.elapsed_ms).sum(),
        });
    }
    apps.sort_by(|a, b| (&a.app, &a.path).cmp(&(&b.app, &b.path)));
    let components: Vec<ComponentRow> = rows.into_iter().flatten().collect();

    let mut totals = Totals {
        apps: apps.len(),
        failed_apps: apps.iter().filter(|a| a.status != "ok").count(),
        components: components.len(),
        exposed: components.iter().filter(|c| c.exposed).count(),
        analyzed: components.iter().filter(|c| c.analyzed).count(),
        findings: findings.len(),
        potential: findings.iter().filter(|f| f.verdict == Verdict::Potential).count(),
        demoted: filter.demoted,
        timed_out_components: components.iter().filter(|c| c.timed_out).count(),
        by_category: BTreeMap::new(),
    };
    for f in &findings {
        *totals.by_category.entry(f.category).or_default() += 1;
    }
    RunOutput {
        findings,
        report: RunReport {
            apps,
            components,
            totals,
            filter,
            datasets: data.hashes.clone(),
            elapsed_ms: start.elapsed().as_millis(),
        },
    }
}

/// Load every bundle under `roots` and analyze them.
pub fn run_pipeline(roots: &[PathBuf], data: &AnalysisData, cfg: &RunConfig) -> std::io::Result<RunOutput> {
    let mut paths = Vec::new();
    for r in roots {
        paths.extend(discover_bundles(r)?);
    }
    let loaded = paths
        .into_par_iter()
        .map(|p| {
            let b = parse_bundle(&p);
            (p, b)
        })
        .collect();
    Ok(run_bundles(loaded, data, cfg))
}

pub fn render_findings_log(findings: &[Finding]) -> String {
    findings.iter().map(render_finding).collect::<Vec<_>>().join("\n")
}

pub fn render_findings_jsonl(findings: &[Finding]) -> String {
    findings
        .iter()
        .map(|f| serde_json::to_string(f).expect("finding serializes") + "\n")
        .collect()
}

/// One line per app.
pub fn render_report_tsv(r: &RunReport) -> String {
    let mut s = String::from("app\tstatus\tcomponents\texposed\tfindings\tdemoted\ttimed_out\telapsed_ms\tpath\n");
    for a in &r.apps {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            a.app, a.status, a.components, a.exposed, a.findings, a.demoted, a.timed_out, a.elapsed_ms, a.path
        );
    }
    s
}

/// Write the four report files into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let report = serde_json::to_string_pretty(&out.report).expect("report serializes") + "\n";
    let files = [
        (FINDINGS_LOG, render_findings_log(&out.findings)),
        (FINDINGS_JSONL, render_findings_jsonl(&out.findings)),
        (REPORT_JSON, report),
        (REPORT_TSV, render_report_tsv(&out.report)),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text)?;
        written.push(p);
    }
    Ok(written)
}

/// Read findings back from a `findings.jsonl` file.
pub fn read_findings_jsonl(text: &str) -> Result<Vec<Finding>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
