//! `isoheat`: generate isoradial graphs, check their invariants and run the
//! short-time scaling sweeps from a TOML configuration.
//!
//! Exit codes: 0 pass, 1 usage or configuration error, 2 invariant failure
//! or inconclusive sweep, 3 kernel certificate failure.

mod check;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use isoheat::config::RunConfig;
use isoheat::geometry::{check_assumptions, generate, validate_isoradial, AssumptionReport, ValidationReport};
use isoheat::operators::{compute_weights, WeightConstants};
use isoheat::regimes::{euclidean_sweep, graph_sweep, ldp_monte_carlo, ldp_sweep, Regime, SweepResult, Verdict};
use isoheat::IsoradialGraph;

use manifest::Recorder;

const EXIT_PASS: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_INVARIANT: i32 = 2;
const EXIT_CERTIFICATE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] isoheat::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "isoheat", version, about = "Discrete heat kernels on isoradial graphs")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the configured graph and its validation report.
    Generate(RunArgs),
    /// Run the configured regime sweep.
    Sweep(RunArgs),
    /// Run the invariant suite on a stored graph file.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "isoheat-out")]
    out_dir: PathBuf,
    /// Replaces every seed declared in the config.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Validation tolerance (generate) or kernel tolerance (sweep).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    graph: PathBuf,
    /// Writes `check.json` and a manifest here when given.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Isoradiality and weight tolerance relative to the circumdiameter.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("isoheat: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Check(args) => cmd_check(&args),
    }
}

fn check_tol(tol: Option<f64>) -> Result<(), CliError> {
    match tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(CliError::Usage(format!("--tol must be positive, got {t}"))),
        _ => Ok(()),
    }
}

fn load_config(path: &Path) -> Result<(RunConfig, Vec<u8>), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Usage(format!("{}: not valid UTF-8", path.display())))?;
    Ok((RunConfig::from_toml_str(&text)?, bytes))
}

fn to_csv(f: impl FnOnce(&mut Vec<u8>) -> isoheat::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct ValidationSummary {
    tol: f64,
    passes: bool,
    all_invariants_hold: bool,
    max_deviation: f64,
    all_centers_inside: bool,
    max_edge_ratio: f64,
    max_dual_ratio: f64,
    max_orthogonality_defect: f64,
    crossings: usize,
}

impl From<&ValidationReport> for ValidationSummary {
    fn from(r: &ValidationReport) -> Self {
        Self {
            tol: r.tol,
            passes: r.passes,
            all_invariants_hold: r.all_invariants_hold(),
            max_deviation: r.max_deviation,
            all_centers_inside: r.all_centers_inside,
            max_edge_ratio: r.max_edge_ratio,
            max_dual_ratio: r.max_dual_ratio,
            max_orthogonality_defect: r.max_orthogonality_defect,
            crossings: r.crossings,
        }
    }
}

#[derive(Serialize)]
struct GenerateReport {
    family: &'static str,
    vertices: usize,
    edges: usize,
    faces: usize,
    validation: ValidationSummary,
    assumptions: AssumptionReport,
    weights: WeightConstants,
}

fn cmd_generate(args: &RunArgs) -> Result<i32, CliError> {
    check_tol(args.tol)?;
    let (cfg, bytes) = load_config(&args.config)?;
    let tol = args.tol.unwrap_or(cfg.validation.tol);
    let g = generate(&cfg.graph)?;
    let mut rec = Recorder::new("generate", &args.config, &bytes, &args.out_dir)?;
    rec.manifest.tol = Some(tol);
    if let Some(seed) = args.seed_override {
        rec.manifest.seeds.push(seed);
    }

    let validation = validate_isoradial(&g, tol);
    let weights = compute_weights(&g)?;
    let report = GenerateReport {
        family: cfg.graph.family.name(),
        vertices: g.num_vertices(),
        edges: g.num_edges(),
        faces: g.num_faces(),
        validation: ValidationSummary::from(&validation),
        assumptions: check_assumptions(&g)?,
        weights: weights.consts,
    };

    let mut graph_json = serde_json::to_vec_pretty(&g.to_graph_file())?;
    graph_json.push(b'\n');
    rec.write("graph.json", &graph_json)?;
    rec.write("validation.csv", &to_csv(|b| validation.write_csv(b))?)?;
    rec.write_json("report.json", &report)?;
    rec.manifest
        .error_bounds
        .insert("isoradial_max_deviation".into(), validation.max_deviation);

    let code = if validation.all_invariants_hold() {
        EXIT_PASS
    } else {
        eprintln!(
            "isoheat: validation failed (max deviation {:.3e}, tolerance {tol:.3e})",
            validation.max_deviation
        );
        EXIT_INVARIANT
    };
    println!(
        "generated {} vertices, {} edges, {} faces; c_p = {:.12}, c_d = {:.12}; validation {}",
        report.vertices,
        report.edges,
        report.faces,
        report.assumptions.c_p,
        report.assumptions.c_d,
        if code == EXIT_PASS { "passed" } else { "failed" }
    );
    rec.finish(code)?;
    Ok(code)
}

fn cmd_sweep(args: &RunArgs) -> Result<i32, CliError> {
    check_tol(args.tol)?;
    let (cfg, bytes) = load_config(&args.config)?;
    let mut plan = cfg.sweep_plan()?;
    if let Some(tol) = args.tol {
        plan.config.tol = tol;
    }
    let mut rec = Recorder::new("sweep", &args.config, &bytes, &args.out_dir)?;
    rec.manifest.tol = Some(plan.config.tol);

    let result: SweepResult = match plan.regime {
        Regime::Euclidean => euclidean_sweep(&plan.config)?,
        Regime::Graph => graph_sweep(&plan.config)?,
        Regime::Ldp => {
            let region = plan.region.expect("validated with the config");
            ldp_sweep(&plan.config, &region, plan.config.t)?
        }
    };

    rec.write("sweep.csv", &to_csv(|b| result.write_csv(b))?)?;
    rec.write_json("sweep.json", &result)?;
    rec.write("plot.csv", &to_csv(|b| result.write_plot_data(b))?)?;
    for row in &result.rows {
        rec.manifest
            .error_bounds
            .insert(format!("scaled_log_kernel[h={}]", row.h), row.kernel_error_bound);
    }

    if let (Regime::Ldp, Some(mc)) = (plan.regime, &plan.monte_carlo) {
        let seed = args.seed_override.unwrap_or(mc.seed);
        rec.manifest.seeds.push(seed);
        let region = plan.region.expect("validated with the config");
        let rows = ldp_monte_carlo(&plan.config, &region, plan.config.t, mc.samples, seed)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).map_err(isoheat::Error::from)?;
        }
        let buf = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
        rec.write("monte_carlo.csv", &buf)?;
    }

    for r in &result.rows {
        match &r.failure {
            Some(msg) => println!("h = {:<8} FAILED: {msg}", r.h),
            None => println!(
                "h = {:<8} scaled = {:>12.6} target = {:>10.6} gap = {:>10.3e} error = {:.2e}{}",
                r.h,
                r.scaled_log_kernel,
                r.target,
                r.gap,
                r.kernel_error_bound,
                if r.flagged { " FLAGGED" } else { "" }
            ),
        }
    }
    let code = if result.rows.iter().any(|r| r.flagged || r.failure.is_some()) {
        EXIT_CERTIFICATE
    } else if result.verdict == Verdict::Inconclusive {
        EXIT_INVARIANT
    } else {
        EXIT_PASS
    };
    println!("verdict: {:?}", result.verdict);
    rec.finish(code)?;
    Ok(code)
}

fn cmd_check(args: &CheckArgs) -> Result<i32, CliError> {
    check_tol(Some(args.tol))?;
    let bytes = fs::read(&args.graph).map_err(|e| CliError::io(&args.graph, e))?;
    let file = serde_json::from_slice(&bytes)?;
    let g = IsoradialGraph::from_graph_file(file)?;
    let report = check::run_checks(&g, args.tol)?;

    println!(
        "{} vertices, {} edges, {} faces; omega in [{:.12}, {:.12}]",
        report.vertices, report.edges, report.faces, report.omega_min, report.omega_max
    );
    for inv in &report.invariants {
        let status = match (inv.skipped, inv.passed) {
            (true, _) => "SKIP",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        println!(
            "{status} {:<22} measured = {:.3e} limit = {:.3e} ({})",
            inv.name, inv.measured, inv.limit, inv.detail
        );
    }
    let code = if report.passed { EXIT_PASS } else { EXIT_INVARIANT };
    if let Some(out_dir) = &args.out_dir {
        let mut rec = Recorder::new("check", &args.graph, &bytes, out_dir)?;
        rec.manifest.tol = Some(args.tol);
        for inv in report.invariants.iter().filter(|i| !i.skipped) {
            rec.manifest.error_bounds.insert(inv.name.to_string(), inv.measured);
        }
        rec.write_json("check.json", &report)?;
        rec.finish(code)?;
    }
    Ok(code)
}
