//! Python bindings. Results come back as JSON strings.

use std::path::{Path, PathBuf};
use std::time::Duration;

use ecv_core::data::{build_datasets as build, write_datasets, AnalysisData, DataFiles};
use ecv_core::filter::{apply_filters, parse_patterns};
use ecv_core::manifest::{determine_exposed_with, exposure_report, ExposureOptions};
use ecv_core::model::{parse_bundle, ComponentDecl, ComponentKind};
use ecv_core::pipeline::{
    discover_bundles, read_findings_jsonl, render_findings_jsonl, run_pipeline, write_outputs, RunConfig,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn load_data(data_dir: Option<&str>) -> PyResult<AnalysisData> {
    let files = DataFiles::resolve(data_dir.map(Path::new)).map_err(io_err)?;
    AnalysisData::from_files(&files).map_err(value_err)
}

fn to_json(v: &impl serde::Serialize) -> PyResult<String> {
    serde_json::to_string(v).map_err(value_err)
}

/// Analyze app bundles. Returns `{"findings": [...], "report": {...}}` as JSON
/// and, with `out_dir`, also writes the report files there.
#[pyfunction]
#[pyo3(signature = (paths, out_dir=None, timeout_secs=120, jobs=0, include_activities=false, provider_default_exported=true, data_dir=None))]
#[allow(clippy::too_many_arguments)]
fn analyze(
    py: Python<'_>,
    paths: Vec<String>,
    out_dir: Option<String>,
    timeout_secs: u64,
    jobs: usize,
    include_activities: bool,
    provider_default_exported: bool,
    data_dir: Option<String>,
) -> PyResult<String> {
    let data = load_data(data_dir.as_deref())?;
    let mut cfg = RunConfig {
        jobs,
        include_activities,
        exposure: ExposureOptions {
            provider_default_exported,
        },
        ..Default::default()
    };
    cfg.budget.per_component_timeout = Duration::from_secs(timeout_secs);
    let roots: Vec<PathBuf> = paths.into_iter().map(PathBuf::from).collect();
    let out = py.detach(|| run_pipeline(&roots, &data, &cfg)).map_err(io_err)?;
    if let Some(dir) = out_dir {
        write_outputs(&out, Path::new(&dir)).map_err(io_err)?;
    }
    to_json(&serde_json::json!({ "findings": out.findings, "report": out.report }))
}

/// Exposure verdicts and per-kind counts for the bundles under `paths`.
#[pyfunction]
#[pyo3(signature = (paths, provider_default_exported=true, data_dir=None))]
fn manifest(paths: Vec<String>, provider_default_exported: bool, data_dir: Option<String>) -> PyResult<String> {
    let data = load_data(data_dir.as_deref())?;
    let mut bundles = Vec::new();
    for root in &paths {
        for p in discover_bundles(Path::new(root)).map_err(io_err)? {
            bundles.push(parse_bundle(&p).map_err(value_err)?);
        }
    }
    let report = exposure_report(
        &bundles,
        &data.permissions,
        ExposureOptions {
            provider_default_exported,
        },
    );
    to_json(&report)
}

/// Exposure of a single component declaration: `(exposed, reason)`.
#[pyfunction]
#[pyo3(signature = (kind, enabled=true, exported=None, has_intent_filter=false, permission=None, provider_default_exported=true))]
fn determine_exposed(
    kind: &str,
    enabled: bool,
    exported: Option<bool>,
    has_intent_filter: bool,
    permission: Option<String>,
    provider_default_exported: bool,
) -> PyResult<(bool, String)> {
    let kind = ComponentKind::from_tag(kind).ok_or_else(|| value_err(format!("unknown component kind `{kind}`")))?;
    let mut c = ComponentDecl::new("component", kind);
    c.enabled = enabled;
    c.exported = exported;
    c.has_intent_filter = has_intent_filter;
    c.permission = permission;
    let data = load_data(None)?;
    let v = determine_exposed_with(
        &c,
        &data.permissions,
        ExposureOptions {
            provider_default_exported,
        },
    );
    Ok((v.exposed, v.reason.to_string()))
}

/// Rebuild the sink and source lists into `out_dir`; returns the written paths.
#[pyfunction]
#[pyo3(signature = (out_dir, data_dir=None))]
fn build_datasets(out_dir: String, data_dir: Option<String>) -> PyResult<Vec<String>> {
    let files = DataFiles::resolve(data_dir.as_deref().map(Path::new)).map_err(io_err)?;
    let built = build(&files).map_err(value_err)?;
    let written = write_datasets(&built, Path::new(&out_dir)).map_err(io_err)?;
    Ok(written.iter().map(|p| p.display().to_string()).collect())
}

/// Re-apply filter patterns to findings given as JSON lines. Without
/// `patterns` the bundled pattern file is used.
#[pyfunction]
#[pyo3(signature = (findings_jsonl, patterns=None))]
fn filter_findings(findings_jsonl: &str, patterns: Option<&str>) -> PyResult<String> {
    let mut findings = read_findings_jsonl(findings_jsonl).map_err(value_err)?;
    let patterns = match patterns {
        Some(text) => parse_patterns(text).map_err(value_err)?,
        None => load_data(None)?.patterns,
    };
    for f in &mut findings {
        f.verdict = ecv_core::backward::Verdict::Potential;
        f.filtered_by.clear();
    }
    apply_filters(&mut findings, &patterns);
    Ok(render_findings_jsonl(&findings))
}

#[pymodule]
fn ecv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(manifest, m)?)?;
    m.add_function(wrap_pyfunction!(determine_exposed, m)?)?;
    m.add_function(wrap_pyfunction!(build_datasets, m)?)?;
    m.add_function(wrap_pyfunction!(filter_findings, m)?)?;
    Ok(())
}
