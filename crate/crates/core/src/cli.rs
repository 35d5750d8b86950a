//! Command-line surface of the `plus` binary.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, unreadable input
//! files), 2 on data or numerical errors.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::design::{
    global_convexity_check, sparse_convexity_check, sparse_riesz_scan, ScanMode,
    StandardizedDesign, DEFAULT_SUBSET_BUDGET,
};
use crate::error::Error;
use crate::io::{
    read_dataset, read_metrics_csv, write_fit_csv, write_metrics_csv, write_path_csv, Dataset,
    FitTable,
};
use crate::path::{compute_path, solve_at_lambda, PathOptions, Termination};
use crate::penalty::QuadSplinePenalty;
use crate::plot::render_svg;
use crate::selection::{estimate_sigma, universal_lambda};
use crate::simlab::{run_experiment, SimConfig};

/// Environment variable that overrides the simulation seed.
pub const SEED_ENV: &str = "PLUS_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "plus",
    version,
    about = "Penalized linear unbiased selection: lasso, MCP and SCAD solution paths"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit coefficients at one penalty level.
    Fit(FitArgs),
    /// Export the solution path as long-format CSV.
    Path(PathArgs),
    /// Run a replicated simulation and write the metrics CSV.
    Simulate(SimulateArgs),
    /// Report convexity and sparse Riesz diagnostics of a design.
    Diagnose(DiagnoseArgs),
    /// Render a metrics CSV as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PenaltyArg {
    L1,
    Mcp,
    Scad,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    pub response: String,
    #[arg(long, value_enum, default_value = "mcp")]
    pub penalty: PenaltyArg,
    /// Concavity parameter for MCP (> 0) and SCAD (> 2).
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Penalty level on the standardized scale.
    #[arg(
        long,
        conflicts_with = "lambda_universal",
        required_unless_present = "lambda_universal"
    )]
    pub lambda: Option<f64>,
    /// Use sigma_hat * sqrt(2 log(p) / n) with sigma_hat refined once from a preliminary fit.
    #[arg(long)]
    pub lambda_universal: bool,
    /// Noise level guess for the preliminary fit.
    #[arg(long, default_value_t = 1.0)]
    pub sigma_guess: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: usize,
    /// Stop tracking once the penalty level drops below this value.
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Column to exclude from the design, if present.
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long, value_enum, default_value = "mcp")]
    pub penalty: PenaltyArg,
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
    /// Support size for the sparse Riesz scan.
    #[arg(long)]
    pub dstar: usize,
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub mode: ModeArg,
    /// Number of subsets for sampled mode.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Subset budget for exhaustive mode.
    #[arg(long, default_value_t = DEFAULT_SUBSET_BUDGET as u64)]
    pub budget: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub metrics: PathBuf,
    /// Column to plot against the lambda ratio.
    #[arg(long, default_value = "mean_me")]
    pub metric: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Fit(a) => cmd_fit(&a),
        Command::Path(a) => cmd_path(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Plot(a) => cmd_plot(&a),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))
}

fn penalty(kind: PenaltyArg, gamma: f64) -> CliResult<QuadSplinePenalty> {
    let pen = match kind {
        PenaltyArg::L1 => Ok(QuadSplinePenalty::l1()),
        PenaltyArg::Mcp => QuadSplinePenalty::mcp(gamma),
        PenaltyArg::Scad => QuadSplinePenalty::scad(gamma),
    };
    pen.map_err(|e| CliError::Usage(e.to_string()))
}

fn load_model(
    m: &ModelArgs,
) -> CliResult<(Dataset, StandardizedDesign, Vec<f64>, QuadSplinePenalty)> {
    let pen = penalty(m.penalty, m.gamma)?;
    let ds = read_dataset(open(&m.data)?, Some(&m.response))?;
    let design = StandardizedDesign::standardize(&ds.x)?;
    let y = ds.y.clone().expect("response column requested");
    Ok((ds, design, y, pen))
}

pub fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    let (ds, design, y, pen) = load_model(&a.model)?;
    let (n, p) = (design.n(), design.p());
    let opts = PathOptions {
        max_steps: a.max_steps,
        tau_max: a.lambda.map(|l| 1.0 / (l * (1.0 - 1e-12))),
        ..Default::default()
    };
    let path = compute_path(&design, &y, &pen, &opts)?;
    if path.termination == Termination::Cap {
        eprintln!(
            "warning: path stopped at the step cap ({} steps)",
            path.steps_used
        );
    }
    let mut fit = match a.lambda {
        Some(lambda) => solve_at_lambda(&path, lambda)?,
        None => {
            if !(a.sigma_guess > 0.0) {
                return Err(CliError::Usage("--sigma-guess must be positive".into()));
            }
            let lambda0 = universal_lambda(a.sigma_guess, p, n)?;
            let prelim = solve_at_lambda(&path, lambda0)?;
            let sigma = estimate_sigma(&design, &y, &prelim)?;
            let lambda1 = universal_lambda(sigma, p, n)?;
            println!(
                "preliminary: lambda = {lambda0}, sigma_hat = {sigma}; refined lambda = {lambda1}"
            );
            solve_at_lambda(&path, lambda1)?
        }
    };
    fit.sigma_hat = estimate_sigma(&design, &y, &fit).ok();
    let raw = design.to_raw_scale(&fit.beta);
    let table = FitTable {
        names: &ds.names,
        coefficients: &raw,
        standardized: &fit.beta,
        lambda: fit.lambda,
        sigma_hat: fit.sigma_hat,
        kkt_residual: fit.kkt.max_violation(),
    };
    let mut w = create(&a.out)?;
    write_fit_csv(&table, &mut w)?;
    w.flush().map_err(|e| CliError::Data(e.to_string()))?;
    println!(
        "lambda = {}, active = {}, kkt_max_residual = {:e}",
        fit.lambda,
        fit.active.len(),
        fit.kkt.max_violation()
    );
    Ok(())
}

pub fn cmd_path(a: &PathArgs) -> CliResult<()> {
    let (_, design, y, pen) = load_model(&a.model)?;
    let opts = PathOptions {
        max_steps: a.max_steps,
        tau_max: a.lambda_min.map(|l| 1.0 / l),
        ..Default::default()
    };
    let path = compute_path(&design, &y, &pen, &opts)?;
    let mut w = create(&a.out)?;
    write_path_csv(&path, &mut w)?;
    w.flush().map_err(|e| CliError::Data(e.to_string()))?;
    println!(
        "{} breakpoints, {} steps, termination = {:?}{}",
        path.breakpoints.len(),
        path.steps_used,
        path.termination,
        if path.jittered { " (jittered)" } else { "" }
    );
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let mut text = String::new();
    std::io::Read::read_to_string(&mut open(&a.config)?, &mut text)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.config.display())))?;
    let mut cfg = SimConfig::parse(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Ok(s) = std::env::var(SEED_ENV) {
        cfg.seed = s.trim().parse().map_err(|_| {
            CliError::Usage(format!("{SEED_ENV} must be a 64-bit integer, got `{s}`"))
        })?;
    }
    let report = run_experiment(&cfg)?;
    for (m, k) in &report.path_failures {
        if *k > 0 {
            eprintln!("warning: {k} {m} paths stopped early (step cap or degenerate facet)");
        }
    }
    let mut w = create(&a.out)?;
    write_metrics_csv(&report.records, &mut w)?;
    w.flush().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}

pub fn diagnose_report(
    design: &StandardizedDesign,
    pen: &QuadSplinePenalty,
    d_star: usize,
    mode: ScanMode,
) -> CliResult<String> {
    let mut s = String::new();
    let (lo, hi) = design.gram_extremes();
    let g = global_convexity_check(design, pen);
    let bounds = sparse_riesz_scan(design, d_star, mode)?;
    let sc = sparse_convexity_check(design, pen, d_star, mode)?;
    let mode_label = match mode {
        ScanMode::Exhaustive { .. } => "exhaustive".to_string(),
        ScanMode::Sampled { count, seed } => format!("sampled({count}, seed {seed})"),
    };
    let flag = if bounds.certified {
        "certificate"
    } else {
        "sampled estimate, not a certificate"
    };
    let _ = writeln!(s, "design: n = {}, p = {}", design.n(), design.p());
    let _ = writeln!(
        s,
        "penalty: {} gamma = {} max_concavity = {}",
        pen.kind().name(),
        pen.gamma(),
        pen.max_concavity()
    );
    let _ = writeln!(s, "gram eigenvalues: min = {lo}, max = {hi}");
    let _ = writeln!(
        s,
        "global convexity: holds = {}, margin = {}",
        g.holds, g.margin
    );
    let _ = writeln!(
        s,
        "sparse riesz: d_star = {d_star}, mode = {mode_label}, c_lower = {}, c_upper = {}, subsets = {} [{flag}]",
        bounds.c_lower, bounds.c_upper, bounds.subsets_scanned
    );
    let _ = writeln!(
        s,
        "sparse convexity: d_star = {d_star}, holds = {}, margin = {} [{flag}]",
        sc.holds, sc.margin
    );
    Ok(s)
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> CliResult<()> {
    let pen = penalty(a.penalty, a.gamma)?;
    let ds = read_dataset(open(&a.data)?, a.response.as_deref())?;
    let design = StandardizedDesign::standardize(&ds.x)?;
    let mode = match a.mode {
        ModeArg::Exhaustive => ScanMode::Exhaustive {
            budget: a.budget as u128,
        },
        ModeArg::Sampled => ScanMode::Sampled {
            count: a.samples,
            seed: a.seed,
        },
    };
    if a.dstar == 0 || a.dstar > design.p() {
        return Err(CliError::Usage(format!(
            "--dstar must lie in 1..={}",
            design.p()
        )));
    }
    let report = diagnose_report(&design, &pen, a.dstar, mode)?;
    match &a.out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(report.as_bytes())
                .map_err(|e| CliError::Data(e.to_string()))?;
        }
        None => print!("{report}"),
    }
    Ok(())
}

pub fn cmd_plot(a: &PlotArgs) -> CliResult<()> {
    let rows = read_metrics_csv(open(&a.metrics)?)?;
    if rows.iter().all(|r| r.get(&a.metric).is_none()) {
        return Err(CliError::Usage(format!(
            "column `{}` not found in {}",
            a.metric,
            a.metrics.display()
        )));
    }
    let svg = render_svg(&rows, &a.metric);
    let mut w = create(&a.out)?;
    w.write_all(svg.as_bytes())
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}
