use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sgmlab::bounds::{
    plateau_bound_sequence, sg_exponential_bound, sg_recursion_bound, sgm_recursion_bound, BoundSequence, Calibration,
    ExponentForm,
};
use sgmlab::config::{load_config, templates, ConfigError, Resolved};
use sgmlab::harness::{
    dominance_check, fit_rate, run_multistage, run_replicates, DominanceReport, ExperimentError, RunSummary,
};
use sgmlab::schedules::{Severity, StepSchedule, ValidityReport};

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sgmlab",
    version,
    about = "Projected stochastic subgradient experiments with momentum"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment and write summary.csv, summary.json, config.resolved.json.
    Run(RunArgs),
    /// Run the constant-and-drop stages listed under "stages".
    Multistage(RunArgs),
    /// Print a bound sequence as CSV (columns j,bound).
    Bounds(BoundsArgs),
    /// Fit log(mse) against log(j+1) on a summary CSV.
    Fit(FitArgs),
    /// Check the step and momentum hypotheses without running.
    Validate(ConfigArgs),
    /// Write a ready-to-run config.
    GenConfig(GenArgs),
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. --set step.constant.a=0.05
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    /// Report schedule violations as warnings and run anyway.
    #[arg(long)]
    force_schedule: bool,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    SgRecursion,
    SgmRecursion,
    Plateau,
    Exponential,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    CurvatureWeighted,
    StepPlusTwiceSquare,
    StepPlusHalfSquare,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum)]
    kind: Option<BoundKind>,
    /// Disable clipping of recursion bounds at L².
    #[arg(long)]
    no_cap: bool,
    /// Exponential bound constant c0.
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    /// Exponential bound burn-in j0.
    #[arg(long, default_value_t = 0)]
    j0: usize,
    #[arg(long, value_enum, default_value = "curvature-weighted")]
    form: FormArg,
    /// Also write bounds.csv into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Summary CSV with checkpoint,mse_mean,mse_sem columns.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    window: Vec<usize>,
}

#[derive(Args)]
struct GenArgs {
    /// Template name; --list shows all.
    name: Option<String>,
    #[arg(long)]
    list: bool,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Io { .. } => EXIT_IO,
            _ => EXIT_INVALID,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match e {
            ExperimentError::Numeric { .. } => EXIT_NUMERIC,
            _ => EXIT_INVALID,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Multistage(a) => cmd_multistage(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Validate(a) => cmd_validate(a),
        Command::GenConfig(a) => cmd_gen_config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn default_workers() -> Result<usize, Failure> {
    match std::env::var("SGMLAB_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::new(EXIT_INVALID, format!("SGMLAB_WORKERS={v:?} is not a positive integer"))),
        Err(_) => Ok(1),
    }
}

fn resolve(args: &ConfigArgs) -> Result<Resolved, Failure> {
    let mut config = load_config(&args.config, &args.overrides)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(w) = args.workers {
        config.workers = Some(w);
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    Ok(config.resolve(base, default_workers()?)?)
}

fn print_findings(reports: &[ValidityReport]) {
    for (k, report) in reports.iter().enumerate() {
        let prefix = if reports.len() > 1 {
            format!("stage {k}: ")
        } else {
            String::new()
        };
        for f in &report.findings {
            let level = match f.severity {
                Severity::Violation => "violation",
                Severity::Warning => "warning",
            };
            eprintln!("{prefix}{level}: {}", f.message);
        }
    }
}

/// Prints findings and fails on violations unless forced.
fn check_schedule(resolved: &Resolved, force: bool) -> Result<Vec<String>, Failure> {
    let reports = resolved.validity()?;
    print_findings(&reports);
    let violations: Vec<String> = reports
        .iter()
        .flat_map(|r| r.violations().map(|f| f.message.clone()))
        .collect();
    if !violations.is_empty() && !force {
        return Err(Failure::new(
            EXIT_INVALID,
            format!(
                "schedule violates the step/momentum hypotheses ({}); pass --force-schedule to run anyway",
                violations.join("; ")
            ),
        ));
    }
    Ok(reports
        .iter()
        .flat_map(|r| r.findings.iter().map(|f| f.message.clone()))
        .collect())
}

fn prepare_out(dir: &Path, files: &[&str], overwrite: bool) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", dir.display())))?;
    if !overwrite {
        for f in files {
            let p = dir.join(f);
            if p.exists() {
                return Err(Failure::new(
                    EXIT_IO,
                    format!("{} exists; pass --overwrite to replace it", p.display()),
                ));
            }
        }
    }
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

const RUN_FILES: [&str; 3] = ["summary.csv", "summary.json", "config.resolved.json"];

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let resolved = resolve(&args.config)?;
    let findings = check_schedule(&resolved, args.force_schedule)?;
    let bound = resolved.analysis_bound()?;
    prepare_out(&args.out, &RUN_FILES, args.overwrite)?;

    let mut summary = run_replicates(&resolved.experiment)?;
    let hash = resolved.config.hash();
    summary.metadata.config_hash = Some(hash);

    let dominance: Option<DominanceReport> = match &bound {
        Some(b) => Some(dominance_check(&summary, &b.as_bound())?),
        None => None,
    };
    let fit = resolved
        .config
        .analysis
        .fit_window
        .map(|w| fit_rate(&summary, w).map_err(|e| e.to_string()));

    write(&args.out.join("summary.csv"), &summary.to_csv(dominance.as_ref()))?;
    let report = json!({
        "metadata": summary.metadata,
        "estimator": summary.estimator,
        "fit": fit.as_ref().and_then(|f| f.as_ref().ok()),
        "fit_error": fit.as_ref().and_then(|f| f.as_ref().err()),
        "dominance": dominance.as_ref().map(|d| json!({
            "violations": d.violations,
            "first_violation": d.first_violation,
            "tested": d.tested,
            "calibrated_constant": d.calibrated_constant,
        })),
        "schedule_findings": findings,
        "rows": summary.rows,
    });
    write(&args.out.join("summary.json"), &pretty(&report))?;
    write(
        &args.out.join("config.resolved.json"),
        &resolved.config.to_pretty_json(),
    )?;
    print_run_digest(&summary, fit.as_ref(), dominance.as_ref());
    Ok(())
}

fn print_run_digest(
    summary: &RunSummary,
    fit: Option<&Result<sgmlab::harness::RateFit, String>>,
    dominance: Option<&DominanceReport>,
) {
    if let Some(last) = summary.rows.last() {
        println!(
            "checkpoint {}: mse {:.6e} ± {:.2e} ({} replicates, {:.2}s)",
            last.checkpoint, last.mse_mean, last.mse_sem, summary.metadata.replicates, summary.metadata.wall_time_secs
        );
    }
    match fit {
        Some(Ok(f)) => println!(
            "fitted exponent {:.4}, r² {:.4} over {} points",
            f.exponent, f.r2, f.points
        ),
        Some(Err(e)) => println!("rate fit failed: {e}"),
        None => {}
    }
    if let Some(d) = dominance {
        println!(
            "bound dominance: {} violations over {} tested checkpoints",
            d.violations, d.tested
        );
    }
}

fn cmd_multistage(args: RunArgs) -> Result<(), Failure> {
    let resolved = resolve(&args.config)?;
    let Some(plan) = resolved.stages.clone() else {
        return Err(Failure::new(EXIT_INVALID, "stages: missing (required for multistage)"));
    };
    let findings = check_schedule(&resolved, args.force_schedule)?;
    prepare_out(&args.out, &RUN_FILES, args.overwrite)?;
    let started = std::time::Instant::now();
    let reports = run_multistage(&resolved.experiment, &plan)?;

    let mut w = String::from("stage,step,length,burn_in,mse_mean,mse_sem,plateau,verdict\n");
    for r in &reports {
        w.push_str(&format!(
            "{},{:e},{},{},{:e},{:e},{:e},{}\n",
            r.stage,
            r.step,
            r.length,
            r.burn_in,
            r.mse_mean,
            r.mse_sem,
            r.plateau,
            if r.within_plateau() { "pass" } else { "fail" }
        ));
    }
    write(&args.out.join("summary.csv"), &w)?;
    let decreasing = reports.windows(2).all(|p| p[1].mse_mean < p[0].mse_mean);
    let report = json!({
        "metadata": {
            "config_hash": resolved.config.hash(),
            "master_seed": resolved.experiment.settings.master_seed,
            "replicates": resolved.experiment.settings.replicates,
            "wall_time_secs": started.elapsed().as_secs_f64(),
        },
        "stages": reports,
        "mse_strictly_decreasing": decreasing,
        "all_within_plateau": reports.iter().all(|r| r.within_plateau()),
        "schedule_findings": findings,
    });
    write(&args.out.join("summary.json"), &pretty(&report))?;
    write(
        &args.out.join("config.resolved.json"),
        &resolved.config.to_pretty_json(),
    )?;
    for r in &reports {
        println!(
            "stage {}: a = {}, n = {}, suffix mse {:.4e} ± {:.1e}, plateau {:.4e}",
            r.stage, r.step, r.length, r.mse_mean, r.mse_sem, r.plateau
        );
    }
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Failure> {
    let resolved = resolve(&args.config)?;
    let exp = &resolved.experiment;
    let c = exp.problem.constants();
    let cap = (!args.no_cap).then_some(c.diameter * c.diameter);
    let e0 = resolved.initial_error();
    let invalid = |e: sgmlab::bounds::BoundsError| Failure::new(EXIT_INVALID, e.to_string());
    let kind = args
        .kind
        .unwrap_or(if exp.momentum == sgmlab::schedules::MomentumSchedule::Zero {
            BoundKind::SgRecursion
        } else {
            BoundKind::SgmRecursion
        });
    let seq: BoundSequence = match kind {
        BoundKind::SgRecursion => sg_recursion_bound(e0, &exp.step, c, exp.horizon, cap).map_err(invalid)?,
        BoundKind::SgmRecursion => {
            sgm_recursion_bound(e0, &exp.step, &exp.momentum, c, exp.horizon, cap).map_err(invalid)?
        }
        BoundKind::Plateau => {
            let StepSchedule::Constant { step } = exp.step else {
                return Err(Failure::new(
                    EXIT_INVALID,
                    "step: the plateau bound needs a constant step",
                ));
            };
            plateau_bound_sequence(step, c, exp.horizon).map_err(invalid)?
        }
        BoundKind::Exponential => {
            let form = match args.form {
                FormArg::CurvatureWeighted => ExponentForm::CurvatureWeighted,
                FormArg::StepPlusTwiceSquare => ExponentForm::StepPlusTwiceSquare,
                FormArg::StepPlusHalfSquare => ExponentForm::StepPlusHalfSquare,
            };
            let cal = Calibration {
                burn_in: args.j0,
                constant: args.c0,
            };
            // Entries before j0 are left at the calibration constant.
            let values = (0..=exp.horizon)
                .map(|n| {
                    if n < args.j0 {
                        Ok(args.c0)
                    } else {
                        sg_exponential_bound(&exp.step, c.strong_convexity, n, cal, form)
                    }
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid)?;
            BoundSequence {
                values,
                description: "exponential SG bound".into(),
            }
        }
    };
    let mut csv = String::from("j,bound\n");
    for (j, v) in seq.values.iter().enumerate() {
        csv.push_str(&format!("{j},{v:e}\n"));
    }
    if let Some(dir) = &args.out {
        prepare_out(dir, &["bounds.csv"], args.overwrite)?;
        write(&dir.join("bounds.csv"), &csv)?;
    } else {
        print!("{csv}");
    }
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<(), Failure> {
    let file =
        fs::File::open(&args.input).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", args.input.display())))?;
    let summary = RunSummary::from_csv(file).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
    let window = match args.window.as_slice() {
        [lo, hi] => (*lo, *hi),
        _ => (
            summary.rows.first().map_or(0, |r| r.checkpoint),
            summary.rows.last().map_or(0, |r| r.checkpoint),
        ),
    };
    let fit = fit_rate(&summary, window).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
    println!(
        "{}",
        pretty(&json!({ "window": [window.0, window.1], "fit": fit })).trim_end()
    );
    Ok(())
}

fn cmd_validate(args: ConfigArgs) -> Result<(), Failure> {
    let resolved = resolve(&args)?;
    let reports = resolved.validity()?;
    let violations: usize = reports.iter().map(|r| r.violations().count()).sum();
    let warnings: usize = reports.iter().map(|r| r.warnings().count()).sum();
    for (k, report) in reports.iter().enumerate() {
        for f in &report.findings {
            let level = match f.severity {
                Severity::Violation => "violation",
                Severity::Warning => "warning",
            };
            if reports.len() > 1 {
                println!("stage {k}: {level}: {}", f.message);
            } else {
                println!("{level}: {}", f.message);
            }
        }
    }
    let c = resolved.experiment.problem.constants();
    println!(
        "m = {}, M = {}, sigma2 = {}, L = {}; {violations} violation(s), {warnings} warning(s)",
        c.strong_convexity, c.grad_bound_sq, c.noise_variance, c.diameter
    );
    if violations > 0 {
        return Err(Failure::new(
            EXIT_INVALID,
            format!("{violations} schedule violation(s)"),
        ));
    }
    Ok(())
}

fn cmd_gen_config(args: GenArgs) -> Result<(), Failure> {
    if args.list {
        for (name, alt, about) in templates::TEMPLATES {
            if name == alt {
                println!("{name:<20} {about}");
            } else {
                println!("{name:<20} (also {alt}) {about}");
            }
        }
        return Ok(());
    }
    let listing = || templates::names().join(", ");
    let Some(name) = args.name else {
        return Err(Failure::new(
            EXIT_INVALID,
            format!("template name required; one of: {}", listing()),
        ));
    };
    let Some(config) = templates::template(&name) else {
        return Err(Failure::new(
            EXIT_INVALID,
            format!("unknown template {name:?}; one of: {}", listing()),
        ));
    };
    let text = config.to_pretty_json();
    match args.out {
        Some(path) => {
            if path.exists() && !args.overwrite {
                return Err(Failure::new(
                    EXIT_IO,
                    format!("{} exists; pass --overwrite to replace it", path.display()),
                ));
            }
            write(&path, &text)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
