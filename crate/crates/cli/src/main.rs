use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ecv_core::backward::Verdict;
use ecv_core::data::{build_datasets, write_datasets, AnalysisData, DataFiles, DATA_DIR_ENV};
use ecv_core::entry::{locate_entries, plan_lifecycle};
use ecv_core::filter::{apply_filters, collect_unique_logs, parse_patterns};
use ecv_core::manifest::{determine_exposed_with, effective_permissions, exposure_report, ExposureOptions};
use ecv_core::model::{parse_bundle, AppBundle};
use ecv_core::pipeline::{
    discover_bundles, read_findings_jsonl, render_findings_jsonl, render_findings_log, render_report_tsv, run_pipeline,
    write_outputs, RunConfig, RunReport, FINDINGS_JSONL, REPORT_JSON,
};

/// Sink-driven detector for exposed-component vulnerabilities in app bundles.
#[derive(Parser)]
#[command(name = "ecv", version)]
struct Cli {
    /// Directory whose data files override the bundled ones.
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rebuild vsinks.txt and vsources.txt from the mapping, supplementary list and rules.
    BuildDatasets {
        #[arg(long)]
        out: PathBuf,
        /// Also print every classified entry with its tag.
        #[arg(long)]
        trace: bool,
    },
    /// Exposure verdict of every component.
    Manifest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
        #[command(flatten)]
        exposure: ExposureArgs,
    },
    /// Entry points of exposed components.
    Entries {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
        #[command(flatten)]
        exposure: ExposureArgs,
    },
    /// Full analysis; writes findings and reports into --out.
    Analyze {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-component time budget in seconds.
        #[arg(long, default_value_t = 120)]
        timeout: u64,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, default_value_t = 50)]
        max_depth: usize,
        #[arg(long)]
        include_activities: bool,
        #[command(flatten)]
        exposure: ExposureArgs,
    },
    /// Re-apply filter patterns to a findings.jsonl file.
    Filter {
        findings: PathBuf,
        /// Pattern file; defaults to the active data's patterns.txt.
        patterns: Option<PathBuf>,
        /// Write the filtered findings here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print unique evidence logs of filterable findings instead.
        #[arg(long)]
        unique_logs: bool,
    },
    /// Summarize a previous analyze run.
    Report {
        /// The --out directory of an analyze run, or its report.json.
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
    },
}

#[derive(Args, Clone, Copy)]
struct ExposureArgs {
    /// Providers without `exported` count as exported.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    provider_default_exported: bool,
}

impl From<ExposureArgs> for ExposureOptions {
    fn from(a: ExposureArgs) -> Self {
        ExposureOptions {
            provider_default_exported: a.provider_default_exported,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

fn load_data(dir: Option<&Path>) -> Result<(DataFiles, AnalysisData)> {
    let files = DataFiles::resolve(dir).context("reading data files")?;
    let data = AnalysisData::from_files(&files).context("parsing data files")?;
    Ok((files, data))
}

fn load_bundles(paths: &[PathBuf]) -> Result<Vec<AppBundle>> {
    let mut out = Vec::new();
    for root in paths {
        let found = discover_bundles(root).with_context(|| format!("listing {}", root.display()))?;
        if found.is_empty() {
            log::warn!("no app bundle under {}", root.display());
        }
        for p in found {
            match parse_bundle(&p) {
                Ok(b) => out.push(b),
                Err(e) => log::error!("{}: {} ({})", p.display(), e, e.kind()),
            }
        }
    }
    Ok(out)
}

fn cmd_build_datasets(data_dir: Option<&Path>, out: &Path, trace: bool) -> Result<()> {
    let files = DataFiles::resolve(data_dir)?;
    let built = build_datasets(&files)?;
    if trace {
        print!("{}", ecv_core::vsink::render_classification(&built.classification));
    }
    for p in write_datasets(&built, out)? {
        eprintln!("wrote {}", p.display());
    }
    let c = &built.classification;
    eprintln!(
        "{} sinks, {} sources, {} deleted, {} untagged",
        c.sinks.len(),
        c.sources.len(),
        c.deleted.len(),
        c.untagged.len()
    );
    Ok(())
}

fn cmd_manifest(data: &AnalysisData, paths: &[PathBuf], format: Format, opts: ExposureOptions) -> Result<()> {
    let bundles = load_bundles(paths)?;
    let report = exposure_report(&bundles, &data.permissions, opts);
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Tsv => {
            println!("app\tcomponent\tkind\texposed\treason");
            for (app, v) in &report.verdicts {
                println!("{app}\t{}\t{}\t{}\t{}", v.component, v.kind.tag(), v.exposed, v.reason);
            }
            for (kind, c) in &report.counts {
                eprintln!("{}: {} exposed ({} unique)", kind.tag(), c.all, c.unique);
            }
            eprintln!("total: {} exposed ({} unique)", report.total.all, report.total.unique);
        }
    }
    Ok(())
}

fn cmd_entries(data: &AnalysisData, paths: &[PathBuf], format: Format, opts: ExposureOptions) -> Result<()> {
    let mut rows = Vec::new();
    for b in load_bundles(paths)? {
        let perms = effective_permissions(&b, &data.permissions);
        let verdicts: Vec<_> = b
            .components
            .iter()
            .map(|c| determine_exposed_with(c, &perms, opts))
            .filter(|v| v.exposed)
            .collect();
        let entries = locate_entries(&b, &verdicts);
        for v in &verdicts {
            let plan = plan_lifecycle(&b, &v.component, &entries);
            for e in plan.entries() {
                rows.push((b.package_name.clone(), e.clone(), plan.initial_before(&e.method)));
            }
        }
    }
    match format {
        Format::Json => {
            let json: Vec<_> = rows
                .iter()
                .map(|(app, e, init)| serde_json::json!({ "app": app, "entry": e, "initial": init }))
                .collect();
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
        Format::Tsv => {
            println!("app\tcomponent\tkind\tentry\tinput_params");
            for (app, e, _) in &rows {
                let input: Vec<String> = e.input_params.iter().map(ToString::to_string).collect();
                println!("{app}\t{}\t{}\t{}\t{}", e.component, e.kind.tag(), e.method, input.join(","));
            }
        }
    }
    Ok(())
}

fn cmd_analyze(data: &AnalysisData, paths: &[PathBuf], out: &Path, cfg: RunConfig) -> Result<()> {
    let run = run_pipeline(paths, data, &cfg).context("scanning inputs")?;
    write_outputs(&run, out).with_context(|| format!("writing results to {}", out.display()))?;
    let t = &run.report.totals;
    eprintln!(
        "{} apps ({} failed), {} exposed components, {} findings ({} potential, {} demoted), {} timed out",
        t.apps, t.failed_apps, t.exposed, t.findings, t.potential, t.demoted, t.timed_out_components
    );
    for (cat, n) in &t.by_category {
        eprintln!("  {cat}: {n}");
    }
    eprintln!("results in {}", out.display());
    Ok(())
}

fn cmd_filter(
    data: &AnalysisData,
    findings: &Path,
    patterns: Option<&Path>,
    out: Option<&Path>,
    unique_logs: bool,
) -> Result<()> {
    let text = fs::read_to_string(findings).with_context(|| format!("reading {}", findings.display()))?;
    let mut found = read_findings_jsonl(&text).with_context(|| format!("parsing {}", findings.display()))?;
    if unique_logs {
        for g in collect_unique_logs(&found) {
            println!("{} {} x{}", g.category, g.sink, g.multiplicity);
            for l in &g.lines {
                println!("  {l}");
            }
        }
        return Ok(());
    }
    let patterns = match patterns {
        Some(p) => parse_patterns(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => data.patterns.clone(),
    };
    for f in &mut found {
        f.verdict = Verdict::Potential;
        f.filtered_by.clear();
    }
    let stats = apply_filters(&mut found, &patterns);
    let jsonl = render_findings_jsonl(&found);
    match out {
        Some(p) => fs::write(p, jsonl).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{jsonl}"),
    }
    for (id, n) in &stats.hits {
        eprintln!("{id}: {n}");
    }
    eprintln!("{} of {} findings demoted", stats.demoted, stats.total);
    Ok(())
}

fn cmd_report(path: &Path, format: Format) -> Result<()> {
    let file = if path.is_dir() { path.join(REPORT_JSON) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    let report: RunReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report.totals)?),
        Format::Tsv => {
            print!("{}", render_report_tsv(&report));
            if path.is_dir() {
                let findings = path.join(FINDINGS_JSONL);
                if let Ok(text) = fs::read_to_string(&findings) {
                    let found = read_findings_jsonl(&text)?;
                    if !found.is_empty() {
                        println!();
                        println!("{}", render_findings_log(&found));
                    }
                }
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let data_dir = cli.data_dir.as_deref();
    match cli.command {
        Command::BuildDatasets { out, trace } => cmd_build_datasets(data_dir, &out, trace),
        Command::Manifest { paths, format, exposure } => {
            cmd_manifest(&load_data(data_dir)?.1, &paths, format, exposure.into())
        }
        Command::Entries { paths, format, exposure } => {
            cmd_entries(&load_data(data_dir)?.1, &paths, format, exposure.into())
        }
        Command::Analyze {
            paths,
            out,
            timeout,
            jobs,
            max_depth,
            include_activities,
            exposure,
        } => {
            if timeout == 0 {
                bail!("--timeout must be positive");
            }
            let mut cfg = RunConfig {
                jobs,
                include_activities,
                exposure: exposure.into(),
                ..Default::default()
            };
            cfg.budget.per_component_timeout = Duration::from_secs(timeout);
            cfg.budget.max_chain_depth = max_depth;
            let (files, data) = load_data(data_dir)?;
            for (name, origin) in &files.origins {
                log::debug!("{name}: {origin}");
            }
            cmd_analyze(&data, &paths, &out, cfg)
        }
        Command::Filter {
            findings,
            patterns,
            out,
            unique_logs,
        } => cmd_filter(&load_data(data_dir)?.1, &findings, patterns.as_deref(), out.as_deref(), unique_logs),
        Command::Report { path, format } => cmd_report(&path, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
