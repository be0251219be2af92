//! Pipeline driver behind the `miniapp-audit` binary: analyze, explore,
//! check and runtime-manifest generation, each writing stable JSON.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use miniapp_core::explorer::{
    explore_bfs_subpackages, explore_dfs_practices, generate_manifest, ExplorationTrace, GenOptions, LoadedSubpackage,
    RuntimeManifest, SimulatedRuntime,
};
use miniapp_core::graphs::{analyze, AppAnalysis, Phase, PrivacyPractice};
use miniapp_core::package::{load_package, MiniAppPackage};
use miniapp_core::policy::{cross_validate, extract_statements, ApiCatalog, InconsistencyReport, Lexicon};
use miniapp_core::Diagnostic;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_DIAGNOSTICS: i32 = 2;

pub const MDG_FILE: &str = "mdg.json";
pub const PRACTICES_FILE: &str = "practices.json";
pub const MDG_COMPLETE_FILE: &str = "mdg-complete.json";
pub const PRACTICES_COMPLETE_FILE: &str = "practices-complete.json";
pub const TRACE_FILE: &str = "trace.json";
pub const REPORT_FILE: &str = "report.json";
pub const RUNTIME_FILE: &str = "runtime.json";
pub const MERGED_DIR: &str = "package";
pub const LEXICON_ENV: &str = "MINISCOPE_LEXICON";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "miniapp-audit", version, about = "Dependency-graph analysis, directed exploration and privacy-policy checks for MiniApp packages")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the dependency graph and classify privacy practices.
    Analyze(RunArgs),
    /// Load subpackages through the simulated runtime, then drive practices.
    Explore(RunArgs),
    /// Cross-validate practices against a privacy policy.
    Check(RunArgs),
    /// Derive a runtime manifest from a package and its subpackage sources.
    GenRuntime(GenArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Unpacked package directory.
    #[arg(long)]
    pub package: PathBuf,
    /// Runtime manifest JSON.
    #[arg(long)]
    pub runtime: Option<PathBuf>,
    /// Privacy policy text.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Lexicon JSON; the built-in lexicon is used when absent.
    #[arg(long, env = LEXICON_ENV)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Last exploration phase to run; defaults to 2 with a runtime, else 1.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub phase: Option<u8>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub package: PathBuf,
    #[arg(long, env = LEXICON_ENV)]
    pub lexicon: Option<PathBuf>,
    /// Output directory for the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// `ROOT=DIR`: subpackage sources, DIR relative to the output directory.
    #[arg(long = "subpackage", value_parser = parse_pair)]
    pub subpackages: Vec<(String, String)>,
    /// `PAGE#XPATH=N`: render count of a looped element.
    #[arg(long = "for-count", value_parser = parse_pair)]
    pub for_counts: Vec<(String, String)>,
    /// Page rendered as blocked (e.g. behind a login wall).
    #[arg(long = "block")]
    pub blocked: Vec<String>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.rsplit_once('=').map(|(a, b)| (a.to_string(), b.to_string())).ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub package_root: PathBuf,
    pub runtime_manifest: Option<PathBuf>,
    pub policy_file: Option<PathBuf>,
    pub lexicon_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub phase_limit: u8,
    pub format: Format,
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self> {
        let phase_limit = a.phase.unwrap_or(if a.runtime.is_some() { 2 } else { 1 });
        if phase_limit == 2 && a.runtime.is_none() {
            bail!("--phase 2 requires --runtime");
        }
        Ok(Self {
            package_root: a.package.clone(),
            runtime_manifest: a.runtime.clone(),
            policy_file: a.policy.clone(),
            lexicon_file: a.lexicon.clone(),
            output_dir: a.out.clone(),
            phase_limit,
            format: a.format,
        })
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        load_lexicon(self.lexicon_file.as_deref())
    }
}

fn load_lexicon(path: Option<&Path>) -> Result<Lexicon> {
    match path {
        Some(p) => Ok(Lexicon::load(p)?),
        None => Ok(Lexicon::builtin()),
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze(a) => cmd_analyze(&RunConfig::from_args(&a)?),
        Command::Explore(a) => cmd_explore(&RunConfig::from_args(&a)?),
        Command::Check(a) => cmd_check(&RunConfig::from_args(&a)?),
        Command::GenRuntime(a) => cmd_gen_runtime(&a),
    }
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct PracticesDoc<'a> {
    phase: Phase,
    practices: &'a [PrivacyPractice],
    diagnostics: &'a [Diagnostic],
}

fn write_analysis(dir: &Path, a: &AppAnalysis, mdg_file: &str, practices_file: &str) -> Result<()> {
    write_json(dir, mdg_file, &a.mdg.to_json())?;
    write_json(dir, practices_file, &PracticesDoc { phase: a.mdg.phase, practices: &a.practices, diagnostics: &a.diagnostics })
}

/// Everything one run of the pipeline produced.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub main: AppAnalysis,
    pub complete: Option<AppAnalysis>,
    pub merged: Option<MiniAppPackage>,
    pub phase_one: Option<ExplorationTrace>,
    pub loaded: Vec<LoadedSubpackage>,
    pub phase_two: Option<ExplorationTrace>,
    pub diagnostics: Vec<Diagnostic>,
}

impl PipelineRun {
    /// The most complete analysis available.
    pub fn latest(&self) -> &AppAnalysis {
        self.complete.as_ref().unwrap_or(&self.main)
    }
}

/// Merges subpackages already unpacked under the package root.
fn merge_premerged(pkg: &MiniAppPackage) -> Result<Option<MiniAppPackage>> {
    let pending: Vec<_> = pkg.subpackages.iter().filter(|s| !s.loaded).map(|s| s.root_prefix.clone()).collect();
    if pending.is_empty() || !pending.iter().all(|r| pkg.has_premerged(r)) {
        return Ok(None);
    }
    let mut next = pkg.clone();
    for root in pending {
        next = next.merge_premerged(&root)?;
    }
    Ok(Some(next))
}

/// Static analysis, plus exploration when a runtime is configured.
pub fn run_pipeline(cfg: &RunConfig, catalog: &ApiCatalog) -> Result<PipelineRun> {
    let pkg = load_package(&cfg.package_root)?;
    let main = analyze(&pkg, catalog)?;
    let mut run = PipelineRun {
        main,
        complete: None,
        merged: None,
        phase_one: None,
        loaded: Vec::new(),
        phase_two: None,
        diagnostics: Vec::new(),
    };
    let Some(manifest_path) = &cfg.runtime_manifest else {
        if let Some(merged) = merge_premerged(&pkg)? {
            run.complete = Some(analyze(&merged, catalog)?);
            run.merged = Some(merged);
        }
        return Ok(run);
    };
    let manifest = RuntimeManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut rt = SimulatedRuntime::new(manifest);
    let (trace, loaded) = explore_bfs_subpackages(&run.main, &mut rt);
    let mut merged = pkg.clone();
    for sub in &loaded {
        match merged.merge_subpackage(&sub.root, &base.join(&sub.dir)) {
            Ok(next) => merged = next,
            Err(e) => run.diagnostics.push(Diagnostic::new(miniapp_core::DiagCode::Exploration, &sub.root, format!("merge failed: {e}"))),
        }
    }
    run.phase_one = Some(trace);
    run.loaded = loaded;
    let complete = analyze(&merged, catalog)?;
    if cfg.phase_limit >= 2 {
        run.phase_two = Some(explore_dfs_practices(&complete, &mut rt));
    }
    run.complete = Some(complete);
    run.merged = Some(merged);
    Ok(run)
}

fn has_diagnostics(run: &PipelineRun) -> bool {
    !run.latest().diagnostics.is_empty()
        || !run.main.diagnostics.is_empty()
        || !run.diagnostics.is_empty()
        || run.phase_one.iter().chain(&run.phase_two).any(|t| !t.diagnostics.is_empty())
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<i32> {
    let catalog = cfg.lexicon()?.catalog();
    let run = run_pipeline(cfg, &catalog)?;
    write_analysis(&cfg.output_dir, &run.main, MDG_FILE, PRACTICES_FILE)?;
    if let Some(c) = &run.complete {
        write_analysis(&cfg.output_dir, c, MDG_COMPLETE_FILE, PRACTICES_COMPLETE_FILE)?;
    }
    Ok(if has_diagnostics(&run) { EXIT_DIAGNOSTICS } else { EXIT_OK })
}

#[derive(Serialize)]
struct TraceDoc<'a> {
    phase_one: &'a ExplorationTrace,
    loaded_subpackages: &'a [LoadedSubpackage],
    #[serde(skip_serializing_if = "Option::is_none")]
    phase_two: Option<&'a ExplorationTrace>,
    diagnostics: &'a [Diagnostic],
}

pub fn cmd_explore(cfg: &RunConfig) -> Result<i32> {
    if cfg.runtime_manifest.is_none() {
        bail!("explore requires --runtime");
    }
    let catalog = cfg.lexicon()?.catalog();
    let run = run_pipeline(cfg, &catalog)?;
    let phase_one = run.phase_one.as_ref().expect("runtime configured");
    write_json(
        &cfg.output_dir,
        TRACE_FILE,
        &TraceDoc { phase_one, loaded_subpackages: &run.loaded, phase_two: run.phase_two.as_ref(), diagnostics: &run.diagnostics },
    )?;
    if let Some(c) = &run.complete {
        write_analysis(&cfg.output_dir, c, MDG_COMPLETE_FILE, PRACTICES_COMPLETE_FILE)?;
    }
    if let Some(merged) = &run.merged {
        let dir = cfg.output_dir.join(MERGED_DIR);
        if dir.exists() {
            fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        merged.write_to(&dir)?;
    }
    Ok(if has_diagnostics(&run) { EXIT_DIAGNOSTICS } else { EXIT_OK })
}

/// Runs the pipeline and cross-validates against the policy.
pub fn check_report(cfg: &RunConfig) -> Result<InconsistencyReport> {
    let policy = cfg.policy_file.as_ref().context("check requires --policy")?;
    let text = fs::read_to_string(policy).with_context(|| format!("reading policy {}", policy.display()))?;
    let lexicon = cfg.lexicon()?;
    let catalog = lexicon.catalog();
    let statements = extract_statements(&text, &lexicon);
    let run = run_pipeline(cfg, &catalog)?;
    let events = run.phase_two.as_ref().map(ExplorationTrace::events).unwrap_or_default();
    Ok(cross_validate(&run.latest().practices, &statements, &events, &catalog))
}

pub fn cmd_check(cfg: &RunConfig) -> Result<i32> {
    let report = check_report(cfg)?;
    write_json(&cfg.output_dir, REPORT_FILE, &report)?;
    Ok(report.exit_code())
}

pub fn cmd_gen_runtime(a: &GenArgs) -> Result<i32> {
    let catalog = load_lexicon(a.lexicon.as_deref())?.catalog();
    let mut pkg = load_package(&a.package)?;
    for (root, dir) in &a.subpackages {
        pkg = pkg.merge_subpackage(root, &a.out.join(dir))?;
    }
    if let Some(merged) = merge_premerged(&pkg)? {
        pkg = merged;
    }
    let mut for_counts = std::collections::BTreeMap::new();
    for (key, n) in &a.for_counts {
        for_counts.insert(key.clone(), n.parse::<usize>().with_context(|| format!("for-count {key}={n}"))?);
    }
    let opts = GenOptions {
        for_counts,
        blocked: a.blocked.iter().cloned().collect(),
        subpackage_dirs: a.subpackages.iter().cloned().collect(),
        ..GenOptions::default()
    };
    let analysis = analyze(&pkg, &catalog)?;
    write_json(&a.out, RUNTIME_FILE, &generate_manifest(&pkg, &analysis, &catalog, &opts))?;
    Ok(if pkg.complete { EXIT_OK } else { EXIT_DIAGNOSTICS })
}
