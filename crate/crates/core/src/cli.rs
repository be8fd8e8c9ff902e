//! `nudge-iv` command-line front end.
//!
//! Exit codes: 0 on success, 1 on a domain error (bad data, failed
//! validation, degenerate estimates), 2 on a usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::estimators::{self, BoundsReport, EstimateReport, Estimator};
use crate::functional::Functional;
use crate::glim::{observe, simulate_panel};
use crate::inference::{self, BootstrapConfig, McStudyResult};
use crate::io::{self, DatasetSchema};
use crate::oracle::{self, CausalTarget, ConditionReport, Conditioning, IttDecomposition, Scale};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "NUDGE_IV_THREADS";

#[derive(Debug, Parser)]
#[command(name = "nudge-iv", version, about = "Instrumental-variable estimation of nudge, local and average treatment effects")]
pub struct Cli {
    /// Random seed (required by simulate and mc-study).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path: a directory for simulate, a JSON report file otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the summary table and progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a counterfactual panel and its observed data.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Estimate an identified quantity from observed data.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Number of bootstrap replicates.
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long, default_value_t = 0.95)]
        ci_level: f64,
    },
    /// Exact value of a causal target and of its Wald-type estimand.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        /// late, nate, ate, att, mean:<a>[:<group>], quantile:<a>:<q>[:<group>],
        /// contrast:<scale>[:<group>] or median-nte[:<group>].
        #[arg(long)]
        target: String,
        /// Condition on this L stratum instead of the whole population.
        #[arg(long)]
        stratum: Option<String>,
    },
    /// Report the identification conditions of a scenario.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        stratum: Option<String>,
    },
    /// Fréchet–Hoeffding bounds on compliance-type shares.
    Bounds {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',')]
        v: Vec<String>,
    },
    /// Monte Carlo study of an estimator against oracle truth.
    #[command(name = "mc-study")]
    McStudy {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
        #[arg(long, default_value_t = 500)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.95)]
        ci_level: f64,
        /// Truth to compare against; defaults to the estimator's target
        /// among nudge-able units.
        #[arg(long)]
        target: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimandArg {
    Wald,
    ArmWald,
    MedianNte,
    Contrast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScaleArg {
    Difference,
    Ratio,
    OddsRatio,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    #[arg(long, value_enum)]
    estimand: EstimandArg,
    /// Treatment arm for arm-wald.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    arm: Option<u8>,
    /// Outcome functional for arm-wald: identity, square, one, const:<v>,
    /// leq:<c>, centered-leq:<c> or table:<x>:<h>,...
    #[arg(long)]
    h: Option<String>,
    /// Comma-separated covariates to condition on.
    #[arg(long, value_delimiter = ',')]
    v: Vec<String>,
    #[arg(long, value_enum, default_value = "difference")]
    scale: ScaleArg,
}

enum CliError {
    Usage(String),
    Domain(String),
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

impl EstimatorArgs {
    fn build(&self) -> Result<Estimator, CliError> {
        let v = self.v.clone();
        let unused = |flag: &str, present: bool| {
            if present {
                Err(CliError::Usage(format!(
                    "--{flag} does not apply to --estimand {:?}",
                    self.estimand
                )))
            } else {
                Ok(())
            }
        };
        match self.estimand {
            EstimandArg::Wald => {
                unused("arm", self.arm.is_some())?;
                unused("h", self.h.is_some())?;
                Ok(if v.is_empty() {
                    Estimator::WaldMarginal
                } else {
                    Estimator::WaldConditional { v }
                })
            }
            EstimandArg::ArmWald => {
                let arm = self
                    .arm
                    .ok_or_else(|| CliError::Usage("--estimand arm-wald requires --arm".into()))?;
                let h = match &self.h {
                    Some(s) => Functional::parse(s).map_err(|e| CliError::Usage(e.to_string()))?,
                    None => Functional::Identity,
                };
                Ok(Estimator::ArmWald { arm: arm == 1, h, v })
            }
            EstimandArg::MedianNte => {
                unused("arm", self.arm.is_some())?;
                unused("h", self.h.is_some())?;
                Ok(Estimator::MedianNte { v })
            }
            EstimandArg::Contrast => {
                unused("arm", self.arm.is_some())?;
                unused("h", self.h.is_some())?;
                let scale = match self.scale {
                    ScaleArg::Difference => Scale::Difference,
                    ScaleArg::Ratio => Scale::Ratio,
                    ScaleArg::OddsRatio => Scale::OddsRatio,
                };
                Ok(Estimator::Contrast { scale, v })
            }
        }
    }
}

fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))),
    }
}

/// Key/value summary table.
fn table(title: &str, rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let mut out = format!("{title}\n");
    for (k, v) in rows {
        let _ = writeln!(out, "  {k:<width$}  {v}");
    }
    out
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "-".into())
}

struct Ctx {
    out: Option<PathBuf>,
    quiet: bool,
}

impl Ctx {
    /// Writes the report to `--out` and the table to stdout, or the report
    /// JSON to stdout when there is no `--out`.
    fn emit<T: Serialize>(&self, report: &T, summary: String) -> Result<(), CliError> {
        match &self.out {
            Some(path) => {
                io::write_report(report, path).map_err(domain)?;
                if !self.quiet {
                    print!("{summary}");
                }
            }
            None => print!("{}", io::report_to_string(report)),
        }
        Ok(())
    }

    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn estimate_summary(r: &EstimateReport) -> String {
    let mut rows = vec![
        ("point", num(r.point)),
        ("first stage", num(r.first_stage)),
        ("n", r.n.to_string()),
    ];
    for (k, v) in &r.components {
        rows.push((k.as_str(), num(*v)));
    }
    if let Some(b) = &r.bootstrap {
        rows.push(("bootstrap se", num(b.se)));
        rows.push(("ci", format!("[{}, {}] at {}", num(b.ci_lo), num(b.ci_hi), b.ci_level)));
        rows.push(("replicates", format!("{} ok, {} failed", b.successes, b.failures)));
    }
    let mut out = table(&r.estimand, &rows);
    for (label, s) in &r.per_stratum {
        let _ = writeln!(
            out,
            "  stratum {label}: point {} first stage {} n {}",
            opt(s.point),
            opt(s.first_stage),
            s.n
        );
    }
    for w in &r.warnings {
        let _ = writeln!(out, "  warning: {w}");
    }
    out
}

fn bounds_summary(r: &BoundsReport) -> String {
    let line = |label: &str, b: &estimators::ShareBounds| {
        format!(
            "  {label}: pi1 {} pi0 {} complier [{}, {}] defier [{}, {}] nudge [{}, {}]\n",
            num(b.pi1),
            num(b.pi0),
            num(b.complier_lo),
            num(b.complier_hi),
            num(b.defier_lo),
            num(b.defier_hi),
            num(b.nudge_lo),
            num(b.nudge_hi)
        )
    };
    let mut out = String::from("share bounds\n");
    out.push_str(&line("marginal", &r.marginal));
    for (label, b) in &r.per_stratum {
        out.push_str(&line(&format!("stratum {label}"), b));
    }
    for w in &r.warnings {
        let _ = writeln!(out, "  warning: {w}");
    }
    out
}

#[derive(Serialize)]
struct OracleReport {
    scenario: String,
    target: CausalTarget,
    value: f64,
    identified_value: Option<f64>,
    identification_gap: Option<f64>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct CheckReport {
    scenario: String,
    conditioning: Conditioning,
    #[serde(flatten)]
    conditions: ConditionReport,
    pi0: f64,
    pi1: f64,
    itt_decomposition: IttDecomposition,
}

fn conditioning(stratum: &Option<String>) -> Conditioning {
    match stratum {
        Some(s) => Conditioning::Stratum(s.clone()),
        None => Conditioning::Marginal,
    }
}

fn bootstrap_cfg(b: usize, seed: u64, ci_level: f64) -> Result<BootstrapConfig, CliError> {
    let cfg = BootstrapConfig {
        ci_level,
        ..BootstrapConfig::new(b, seed)
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn read_data(ctx: &Ctx, path: &Path) -> Result<estimators::ObservedDataset, CliError> {
    let data = io::read_dataset(path, &DatasetSchema::default()).map_err(domain)?;
    ctx.log(&format!("{}: {}", path.display(), io::dataset_summary(&data)));
    Ok(data)
}

fn require_seed(seed: Option<u64>, cmd: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage(format!("{cmd} requires --seed")))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        out: cli.out.clone(),
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Simulate { scenario, n } => {
            let seed = require_seed(cli.seed, "simulate")?;
            let dir = cli
                .out
                .ok_or_else(|| CliError::Usage("simulate requires --out DIR".into()))?;
            if n == 0 {
                return Err(CliError::Usage("--n must be positive".into()));
            }
            let spec = io::load_scenario(&scenario).map_err(domain)?;
            let panel = simulate_panel(&spec, n, seed).map_err(domain)?;
            let data = observe(&panel).map_err(domain)?;
            fs::create_dir_all(&dir).map_err(|e| domain(format!("{}: {e}", dir.display())))?;
            io::write_panel(&panel, dir.join("panel.csv")).map_err(domain)?;
            io::write_dataset(&data, dir.join("observed.csv")).map_err(domain)?;
            if !ctx.quiet {
                let nudge = panel.rows.iter().filter(|r| r.nudge).count();
                print!(
                    "{}",
                    table(
                        &format!("simulated {}", spec.name),
                        &[
                            ("rows", n.to_string()),
                            ("nudge-able", nudge.to_string()),
                            ("panel", dir.join("panel.csv").display().to_string()),
                            ("observed", dir.join("observed.csv").display().to_string()),
                        ],
                    )
                );
            }
            Ok(())
        }
        Command::Estimate {
            data,
            estimator,
            bootstrap,
            ci_level,
        } => {
            let est = estimator.build()?;
            let cfg = match bootstrap {
                Some(b) => Some(bootstrap_cfg(b, cli.seed.unwrap_or(0), ci_level)?),
                None => None,
            };
            let data = read_data(&ctx, &data)?;
            let report = match cfg {
                Some(cfg) => inference::bootstrap(&data, &est, &cfg).map_err(domain)?,
                None => est.estimate(&data).map_err(domain)?,
            };
            ctx.emit(&report, estimate_summary(&report))
        }
        Command::Oracle {
            scenario,
            target,
            stratum,
        } => {
            let kind = CausalTarget::parse(&target).map_err(CliError::Usage)?;
            let spec = io::load_scenario(&scenario).map_err(domain)?;
            let target = CausalTarget {
                kind,
                conditioning: conditioning(&stratum),
            };
            let value = oracle::true_target(&spec, &target).map_err(domain)?;
            let mut notes = Vec::new();
            let identified = match oracle::identified_value(&spec, &target) {
                Ok(v) => Some(v),
                Err(e) => {
                    notes.push(format!("identified value: {e}"));
                    None
                }
            };
            let report = OracleReport {
                scenario: spec.name.clone(),
                target,
                value,
                identified_value: identified,
                identification_gap: identified.map(|v| (v - value).abs()),
                notes,
            };
            let summary = table(
                &format!("oracle {} on {}", report.scenario, target_label(&report.target)),
                &[
                    ("value", format!("{value:.12}")),
                    ("identified", opt(report.identified_value)),
                    ("gap", report.identification_gap.map(|g| format!("{g:.3e}")).unwrap_or("-".into())),
                ],
            );
            ctx.emit(&report, summary)
        }
        Command::Check { scenario, stratum } => {
            let spec = io::load_scenario(&scenario).map_err(domain)?;
            let cond = conditioning(&stratum);
            let conditions = oracle::check_conditions(&spec, &cond).map_err(domain)?;
            let (pi0, pi1) = oracle::potential_treatment_shares(&spec, &cond).map_err(domain)?;
            let itt = oracle::itt_decomposition(&spec, &cond).map_err(domain)?;
            let summary = table(
                &format!("conditions for {}", spec.name),
                &[
                    ("null_cov", format!("{:.3e}", conditions.null_cov)),
                    ("bcs_max_dev", format!("{:.3e}", conditions.bcs_max_dev)),
                    ("relevance_ok", conditions.relevance_ok.to_string()),
                    ("nudge share", num(conditions.nudge_share)),
                    ("complier share", num(conditions.complier_share)),
                    ("defier share", num(conditions.defier_share)),
                ],
            );
            let report = CheckReport {
                scenario: spec.name.clone(),
                conditioning: cond,
                conditions,
                pi0,
                pi1,
                itt_decomposition: itt,
            };
            ctx.emit(&report, summary)
        }
        Command::Bounds { data, v } => {
            let data = read_data(&ctx, &data)?;
            let report = estimators::frechet_bounds(&data, &v).map_err(domain)?;
            ctx.emit(&report, bounds_summary(&report))
        }
        Command::McStudy {
            scenario,
            estimator,
            n,
            reps,
            bootstrap,
            ci_level,
            target,
        } => {
            let seed = require_seed(cli.seed, "mc-study")?;
            let est = estimator.build()?;
            let kind = match target {
                Some(t) => CausalTarget::parse(&t).map_err(CliError::Usage)?,
                None => est.default_target().ok_or_else(|| {
                    CliError::Usage("this estimator has no default target; pass --target".into())
                })?,
            };
            if n == 0 || reps == 0 {
                return Err(CliError::Usage("--n and --reps must be positive".into()));
            }
            let cfg = bootstrap_cfg(bootstrap, seed, ci_level)?;
            let spec = io::load_scenario(&scenario).map_err(domain)?;
            let result: McStudyResult = inference::mc_study(
                &spec,
                &est,
                &CausalTarget::marginal(kind),
                n,
                reps,
                &cfg,
                !ctx.quiet,
            )
            .map_err(domain)?;
            let summary = table(
                &format!("mc-study {} (n = {n}, R = {reps}, B = {bootstrap})", spec.name),
                &[
                    ("truth", num(result.truth)),
                    ("mean estimate", num(result.mean_estimate)),
                    ("bias", num(result.bias)),
                    ("sd", num(result.sd)),
                    ("rmse", num(result.rmse)),
                    ("coverage", num(result.coverage)),
                    ("mean ci width", num(result.mean_ci_width)),
                    ("failures", result.failures.to_string()),
                ],
            );
            ctx.emit(&result, summary)
        }
    }
}

fn target_label(t: &CausalTarget) -> String {
    let cond = match &t.conditioning {
        Conditioning::Marginal => String::new(),
        Conditioning::Stratum(s) => format!(" | l = {s}"),
    };
    format!("{:?}{cond}", t.kind)
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = thread_count().and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(domain)?;
        pool.install(|| execute(cli))
    });
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{}", Cli::command().render_usage());
            2
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
