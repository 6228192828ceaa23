//! Command-line surface binding the measure catalog, transport solvers,
//! multiscale bounds, the prediction engine and the experiment harness.
//!
//! Exit codes: 0 success (or consistent/inconclusive verdicts), 1 internal
//! error, 2 input error, 3 refusal/underpowered, 4 inconsistent verdict.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wassrate::experiments::{
    self, config_from_toml, ExperimentConfig, RateReport, Verdict,
};
use wassrate::measures::{parse_spec, EmpiricalMeasure, MeasureError};
use wassrate::multiscale;
use wassrate::theory::{
    self, baum_katz_weights, classify, moderate_deviation_rate, moment_rate, parse_ratio,
    BaumKatz, MomentKind, ProblemParams, Statistic,
};
use wassrate::transport::{self, Method};
use wassrate::verify;

#[derive(Parser)]
#[command(name = "wassrate", version, about = "Empirical Wasserstein distances, multiscale bounds and rate experiments")]
struct Cli {
    /// Worker threads for experiment pools (0 = auto).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Seed override for randomized subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// W_p^p between two point files, or a point file and a catalog measure.
    Distance(DistanceArgs),
    /// Multiscale discrepancy profile of a sample against a catalog measure.
    Bound(BoundArgs),
    /// Regime classification and predicted exponents for (p, d, r).
    Predict(PredictArgs),
    /// Moment-rate experiment from a config file.
    Rates(RunArgs),
    /// Moderate-deviation tail experiment from a config file.
    Deviations(RunArgs),
    /// Running-max trajectory diagnostics from a config file.
    Trajectory(RunArgs),
    /// Run the cross-module invariant suite.
    Verify(VerifyArgs),
    /// Export the prediction-engine exponent table as JSON.
    ExportTable(ExportArgs),
}

#[derive(Args)]
struct DistanceArgs {
    /// Wasserstein order p >= 1.
    #[arg(long, default_value = "1")]
    p: String,
    /// First point file (headerless CSV, one point per row).
    a: PathBuf,
    /// Second point file; omit when --measure is given.
    b: Option<PathBuf>,
    /// Catalog measure spec instead of a second file.
    #[arg(long)]
    measure: Option<String>,
    /// Write the realized transport plan as JSON.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Cap for the exact assignment solver.
    #[arg(long, default_value_t = transport::DEFAULT_ASSIGNMENT_CAP)]
    cap: usize,
    /// Entropic regularization as a fraction of the median pairwise cost
    /// (used when the exact solvers do not apply).
    #[arg(long, default_value_t = 0.05)]
    epsilon_factor: f64,
    /// Oversampling factor for semi-discrete estimation in d >= 2.
    #[arg(long, default_value_t = 4)]
    oversample: usize,
}

#[derive(Args)]
struct BoundArgs {
    /// Sample point file.
    sample: PathBuf,
    /// Catalog measure spec with an exact cell-mass oracle.
    #[arg(long)]
    measure: String,
    #[arg(long, default_value = "1")]
    p: String,
    /// Block truncation (default: from the measure tail).
    #[arg(long)]
    mmax: Option<u32>,
    /// Refinement truncation (default: by dimension).
    #[arg(long)]
    lmax: Option<u32>,
    /// Truncation cube half-width M for the A/B split.
    #[arg(long, name = "M")]
    cube: Option<f64>,
    /// Emit the full profile as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    p: String,
    #[arg(long)]
    d: u32,
    #[arg(long)]
    r: String,
    /// Moment hypothesis class.
    #[arg(long, value_parser = ["weak", "strong"], default_value = "strong")]
    kind: String,
    /// Statistic to predict (default: all applicable).
    #[arg(long)]
    statistic: Option<String>,
    /// Moderate-deviation / series scaling exponent alpha.
    #[arg(long)]
    alpha: Option<String>,
    /// Evaluate the deviation envelope at (n, x).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    x: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// Declarative TOML config mirroring the experiment fields.
    config: PathBuf,
    /// Output directory for report.json and values.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run only one invariant group.
    #[arg(long)]
    group: Option<String>,
}

#[derive(Args)]
struct ExportArgs {
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_OK: u8 = 0;
const EXIT_INTERNAL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_REFUSAL: u8 = 3;
const EXIT_INCONSISTENT: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    };
    ExitCode::from(code)
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
    fn refusal(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_REFUSAL,
            message: message.into(),
        }
    }
    fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<theory::TheoryError> for CliError {
    fn from(e: theory::TheoryError) -> Self {
        match e {
            theory::TheoryError::InvalidParams(_) => CliError::input(e.to_string()),
            theory::TheoryError::NoPrediction(_) => CliError::refusal(e.to_string()),
        }
    }
}

impl From<transport::TransportError> for CliError {
    fn from(e: transport::TransportError) -> Self {
        match e {
            transport::TransportError::AssignmentCap { .. } => CliError::refusal(e.to_string()),
            transport::TransportError::DimMismatch { .. } => {
                CliError::input(format!("dimension mismatch: {e}"))
            }
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<multiscale::MultiscaleError> for CliError {
    fn from(e: multiscale::MultiscaleError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<experiments::ExperimentError> for CliError {
    fn from(e: experiments::ExperimentError) -> Self {
        use experiments::ExperimentError as E;
        match &e {
            E::Underpowered { .. } | E::DivergentMoment { .. } => {
                CliError::refusal(e.to_string())
            }
            E::Config(_) | E::Measure(_) => CliError::input(e.to_string()),
            E::Theory(theory::TheoryError::NoPrediction(_)) => CliError::refusal(e.to_string()),
            E::Transport(t) => CliError::from(t.clone()),
            _ => CliError::internal(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Distance(args) => cmd_distance(args, cli.seed),
        Command::Bound(args) => cmd_bound(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Rates(args) => cmd_rates(args, cli.seed),
        Command::Deviations(args) => cmd_deviations(args, cli.seed),
        Command::Trajectory(args) => cmd_trajectory(args, cli.seed),
        Command::Verify(args) => cmd_verify(args, cli.seed),
        Command::ExportTable(args) => cmd_export_table(args),
    }
}

/// Headerless CSV point file: one point per row, `d` float columns.
fn read_points(path: &Path) -> Result<EmpiricalMeasure, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect();
        let row = row.map_err(|e| {
            CliError::input(format!("{} line {}: {e}", path.display(), lineno + 1))
        })?;
        if let Some(first) = points.first() {
            if row.len() != first.len() {
                return Err(CliError::input(format!(
                    "{} line {}: expected {} columns, got {}",
                    path.display(),
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        points.push(row);
    }
    if points.is_empty() {
        return Err(CliError::input(format!(
            "{}: no points found",
            path.display()
        )));
    }
    EmpiricalMeasure::from_points(points).map_err(CliError::from)
}

fn method_tag(m: Method) -> &'static str {
    match m {
        Method::Exact1d => "exact-1d",
        Method::Assignment => "assignment",
        Method::Entropic => "entropic",
    }
}

fn cmd_distance(args: DistanceArgs, seed: Option<u64>) -> Result<u8, CliError> {
    let p = theory::ratio_to_f64(parse_ratio(&args.p)?);
    if p < 1.0 {
        return Err(CliError::input("p must be >= 1"));
    }
    let x = read_points(&args.a)?;

    if let Some(spec) = &args.measure {
        let mu = parse_spec(spec)?;
        let (value, proxy) = transport::semidiscrete_wp(
            &x,
            &mu,
            p,
            args.oversample,
            seed.unwrap_or(0),
            &transport::SemidiscreteOptions {
                assignment_cap: args.cap,
                entropic_epsilon_factor: args.epsilon_factor,
                ..Default::default()
            },
        )?;
        println!("W_p^p = {value}");
        println!("W_p = {}", value.powf(1.0 / p));
        println!("method = semidiscrete (stderr proxy {proxy})");
        return Ok(EXIT_OK);
    }

    let b = args
        .b
        .as_ref()
        .ok_or_else(|| CliError::input("need a second point file or --measure"))?;
    let y = read_points(b)?;
    let (value, plan) = if x.dim() == 1 && y.dim() == 1 {
        transport::wasserstein_1d(&x, &y, p)?
    } else if x.len() == y.len() && x.is_uniform() && y.is_uniform() && x.len() <= args.cap {
        transport::wasserstein_assignment(&x, &y, p, Some(args.cap))?
    } else {
        let eps = args.epsilon_factor * transport_median(&x, &y, p);
        let sol = transport::wasserstein_entropic(&x, &y, p, eps.max(1e-12), 5000)?;
        let plan = sol.plan.clone().expect("plan kept");
        (sol.value, plan)
    };
    println!("W_p^p = {value}");
    println!("W_p = {}", value.powf(1.0 / p));
    println!("method = {}", method_tag(plan.method));
    if let Some(path) = args.plan {
        let json = serde_json::to_string_pretty(&plan)
            .map_err(|e| CliError::internal(e.to_string()))?;
        fs::write(&path, json).map_err(|e| CliError::internal(e.to_string()))?;
        println!("plan written to {}", path.display());
    }
    Ok(EXIT_OK)
}

fn transport_median(x: &EmpiricalMeasure, y: &EmpiricalMeasure, p: f64) -> f64 {
    // Strided deterministic subsample, same contract as the library's
    // internal epsilon heuristic.
    let mut costs = Vec::new();
    let si = (x.len() / 64).max(1);
    let sj = (y.len() / 64).max(1);
    for i in (0..x.len()).step_by(si) {
        for j in (0..y.len()).step_by(sj) {
            let d2: f64 = x
                .point(i)
                .iter()
                .zip(y.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            costs.push(d2.sqrt().powf(p));
        }
    }
    costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    costs[costs.len() / 2]
}

fn cmd_bound(args: BoundArgs) -> Result<u8, CliError> {
    let sample = read_points(&args.sample)?;
    let mu = parse_spec(&args.measure)?;
    let p = theory::ratio_to_f64(parse_ratio(&args.p)?);
    let m_max = args.mmax.unwrap_or_else(|| multiscale::default_m_max(&mu, p));
    let level_max = args
        .lmax
        .unwrap_or_else(|| multiscale::default_level_max(mu.dim()));
    let profile = multiscale::delta_profile(&sample, &mu, p, m_max, level_max, args.cube)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&profile).map_err(|e| CliError::internal(e.to_string()))?
        );
    } else {
        println!("Delta_p = {}", profile.delta_p);
        println!("D_p = {}", profile.d_p);
        if let Some(split) = &profile.split {
            println!("A_pM(M={}) = {}", split.cube, split.a_pm);
            println!("B_pM(M={}) = {}", split.cube, split.b_pm);
        }
        println!("tail_bound = {}", profile.tail_bound);
        println!(
            "truncation: m_max = {}, level_max = {}",
            profile.m_max, profile.level_max
        );
    }
    Ok(EXIT_OK)
}

fn cmd_predict(args: PredictArgs) -> Result<u8, CliError> {
    let kind = if args.kind == "weak" {
        MomentKind::Weak
    } else {
        MomentKind::Strong
    };
    let params = ProblemParams::new(parse_ratio(&args.p)?, args.d, parse_ratio(&args.r)?, kind)?;
    println!("regime = {:?}", classify(&params));
    if theory::near_boundary(&params) {
        println!("warning: parameters sit within 2% of the regime boundary");
    }
    let named = |name: &str| -> Option<Statistic> {
        match name {
            "mean" => Some(Statistic::Mean),
            "second_moment" => Some(Statistic::SecondMoment),
            "r_moment" => Some(Statistic::RMoment),
            "as_rate" => Some(Statistic::AsRate),
            "lil_rate" => Some(Statistic::LilRate),
            _ => None,
        }
    };
    let stats: Vec<Statistic> = match &args.statistic {
        Some(s) => vec![named(s).ok_or_else(|| CliError::input(format!("unknown statistic `{s}`")))?],
        None => vec![
            Statistic::Mean,
            Statistic::SecondMoment,
            Statistic::RMoment,
            Statistic::AsRate,
            Statistic::LilRate,
        ],
    };
    for s in stats {
        match moment_rate(&params, s) {
            Ok(pred) => println!(
                "{:?}: exponent = {}, log_power = {} [{}] (shape only)",
                s,
                theory::format_ratio(pred.exponent),
                theory::format_ratio(pred.log_power),
                pred.source
            ),
            Err(e) => println!("{s:?}: {e}"),
        }
    }
    if let Some(alpha) = &args.alpha {
        let alpha = parse_ratio(alpha)?;
        match moderate_deviation_rate(&params, alpha) {
            Ok(pred) => println!(
                "deviation_prob(alpha = {}): n-exponent = {}, x-power = {}, log_power = {}",
                theory::format_ratio(alpha),
                theory::format_ratio(pred.exponent),
                theory::format_ratio(pred.x_power),
                theory::format_ratio(pred.log_power),
            ),
            Err(e) => println!("deviation_prob: {e}"),
        }
        match baum_katz_weights(&params, alpha) {
            Ok(BaumKatz::Admissible { exponent }) => println!(
                "baum_katz(alpha = {}): weight exponent = {}",
                theory::format_ratio(alpha),
                theory::format_ratio(exponent)
            ),
            Ok(BaumKatz::Refused { lo, lo_open, hi }) => println!(
                "baum_katz(alpha = {}): refused, admissible {}{}, {}]",
                theory::format_ratio(alpha),
                if lo_open { "(" } else { "[" },
                theory::format_ratio(lo),
                theory::format_ratio(hi)
            ),
            Err(e) => println!("baum_katz: {e}"),
        }
    }
    if let (Some(n), Some(x)) = (args.n, args.x) {
        let v = theory::deviation_bound(&params, n, x)?;
        println!("deviation_envelope(n = {n}, x = {x}) = {v} (shape only)");
    }
    Ok(EXIT_OK)
}

fn load_config(args: &RunArgs, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::input(format!("{}: {e}", args.config.display())))?;
    let mut config = config_from_toml(&text)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn write_reports(
    out: &Path,
    report_json: String,
    raw: &experiments::RawValues,
) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    fs::write(out.join("report.json"), report_json)
        .map_err(|e| CliError::internal(e.to_string()))?;
    fs::write(out.join("values.csv"), RateReport::to_csv(raw))
        .map_err(|e| CliError::internal(e.to_string()))?;
    Ok(())
}

fn verdict_exit(verdict: Verdict) -> u8 {
    match verdict {
        Verdict::Consistent | Verdict::Inconclusive => EXIT_OK,
        Verdict::Inconsistent => EXIT_INCONSISTENT,
    }
}

fn cmd_rates(args: RunArgs, seed: Option<u64>) -> Result<u8, CliError> {
    let config = load_config(&args, seed)?;
    let (report, raw) = experiments::run_moment_rate(&config)?;
    write_reports(
        &args.out,
        serde_json::to_string_pretty(&report).map_err(|e| CliError::internal(e.to_string()))?,
        &raw,
    )?;
    println!("estimator = {}", report.estimator);
    println!("n, stat, stderr:");
    for pn in &report.per_n {
        println!("  {:>8}  {:.6e}  {:.2e}", pn.n, pn.stat_value, pn.stat_stderr);
    }
    if let (Some(fit), Some(pred)) = (&report.fit, &report.prediction) {
        println!(
            "slope = {:.4} +- {:.4} (R^2 = {:.4}), predicted = {} [{}], band = {:.4}",
            fit.slope,
            fit.slope_stderr,
            fit.r_squared,
            theory::format_ratio(pred.exponent),
            pred.source,
            report.band,
        );
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!("verdict = {:?}", report.verdict);
    Ok(verdict_exit(report.verdict))
}

fn cmd_deviations(args: RunArgs, seed: Option<u64>) -> Result<u8, CliError> {
    let config = load_config(&args, seed)?;
    let (report, raw) = experiments::run_deviation_tail(&config)?;
    write_reports(
        &args.out,
        serde_json::to_string_pretty(&report).map_err(|e| CliError::internal(e.to_string()))?,
        &raw,
    )?;
    println!("alpha = {}", report.alpha);
    println!("x-grid: {:?}", report.x_grid);
    for cell in report.cells.iter().filter(|c| c.used_in_fit) {
        println!(
            "  n = {:>8}, x = {:.4e}: p_hat = {:.4} [{:.4}, {:.4}]",
            cell.n, cell.x, cell.p_hat, cell.wilson_lo, cell.wilson_hi
        );
    }
    if let Some(fit) = &report.pooled_fit {
        println!(
            "pooled decay slope = {:.4} +- {:.4}, predicted = {}, band = {:.4}",
            fit.slope,
            fit.slope_stderr,
            theory::format_ratio(report.prediction.exponent),
            report.band,
        );
    }
    println!("verdict = {:?}", report.verdict);
    Ok(verdict_exit(report.verdict))
}

fn cmd_trajectory(args: RunArgs, seed: Option<u64>) -> Result<u8, CliError> {
    let config = load_config(&args, seed)?;
    let (report, raw) = experiments::run_running_max(&config)?;
    write_reports(
        &args.out,
        serde_json::to_string_pretty(&report).map_err(|e| CliError::internal(e.to_string()))?,
        &raw,
    )?;
    println!(
        "normalization = {:?} (regime {:?}), {} trajectories, {} flagged",
        report.normalization,
        report.regime,
        report.trajectories.len(),
        report.flagged
    );
    println!("note: {}", report.note);
    Ok(EXIT_OK)
}

fn cmd_verify(args: VerifyArgs, seed: Option<u64>) -> Result<u8, CliError> {
    let groups = verify::run_groups(args.group.as_deref(), seed.unwrap_or(20260809));
    if groups.is_empty() {
        return Err(CliError::input(format!(
            "unknown invariant group `{}`",
            args.group.unwrap_or_default()
        )));
    }
    let mut all_ok = true;
    for group in &groups {
        let ok = group.passed();
        all_ok &= ok;
        println!("[{}] {}", if ok { "PASS" } else { "FAIL" }, group.group);
        for check in &group.checks {
            if check.passed {
                println!("    ok   {}", check.name);
            } else {
                println!("    FAIL {}: {}", check.name, check.detail);
            }
        }
    }
    Ok(if all_ok { EXIT_OK } else { EXIT_INTERNAL })
}

fn cmd_export_table(args: ExportArgs) -> Result<u8, CliError> {
    let rows = theory::standard_table();
    let json =
        serde_json::to_string_pretty(&rows).map_err(|e| CliError::internal(e.to_string()))?;
    match args.out {
        Some(path) => {
            fs::write(&path, json).map_err(|e| CliError::internal(e.to_string()))?;
            println!("table written to {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(EXIT_OK)
}
