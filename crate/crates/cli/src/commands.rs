//! Subcommands. Everything numeric comes from the `varpose` library; this
//! module only wires configuration, execution and output together.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use varpose::acceptance::{run_criterion, CriterionReport, Scale, CRITERIA};
use varpose::scenario::{run_scenario, ScenarioRun};
use varpose::{IntegratorMode, ScenarioConfig};

use crate::config::{apply_overrides, read_config, to_toml, validate};
use crate::error::{io_error, CliError};
use crate::output::write_run_csv;
use crate::plot::emit_plots;

#[derive(Debug, Parser)]
#[command(name = "varpose", version, about = "Variational relative pose estimation on SE(3)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario described by a config file.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the built-in two-vehicle scenario.
    PaperScenario {
        #[command(flatten)]
        run: RunArgs,
        /// Write the preset as a fully explicit config file and exit.
        #[arg(long, value_name = "PATH")]
        write_config: Option<PathBuf>,
    },
    /// Repeat a scenario over seeds and noise widths in parallel.
    Sweep {
        /// Base scenario; the built-in preset when absent.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        /// Number of seeds, counting up from the configured one.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Noise support widths in millimetres (positions and point
        /// velocities alike), comma separated. Defaults to the config's.
        #[arg(long, value_delimiter = ',', value_name = "MM")]
        noise_mm: Vec<f64>,
        /// Worker threads; all cores when absent.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the acceptance suite and write a JSON report.
    Check {
        /// Scenario whose gains and settings the suite uses; the preset when absent.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, env = "VARPOSE_OUT_DIR", default_value = "out", value_name = "DIR")]
        out: PathBuf,
        /// Full-length runs instead of the desk-scale ones.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Lgvi,
    Rk4,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<IntegratorMode> {
        match self {
            ModeArg::Lgvi => vec![IntegratorMode::Lgvi],
            ModeArg::Rk4 => vec![IntegratorMode::Rk4],
            ModeArg::Both => vec![IntegratorMode::Lgvi, IntegratorMode::Rk4],
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Output directory.
    #[arg(long, env = "VARPOSE_OUT_DIR", default_value = "out", value_name = "DIR")]
    pub out: PathBuf,
    /// Noise seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integrator; the config's when absent.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Number of steps; sets the duration to `steps · dt`.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Step size override (s).
    #[arg(long, value_name = "SECONDS")]
    pub dt: Option<f64>,
    /// Skip the SVG plots.
    #[arg(long)]
    pub no_plots: bool,
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, run } => {
            let base = read_config(&config)?;
            run_command(base, &run)
        }
        Command::PaperScenario { run, write_config } => {
            if let Some(path) = write_config {
                std::fs::write(&path, to_toml(&ScenarioConfig::paper())).map_err(io_error(&path))?;
                println!("wrote {}", path.display());
                return Ok(());
            }
            run_command(ScenarioConfig::paper(), &run)
        }
        Command::Sweep {
            config,
            run,
            seeds,
            noise_mm,
            workers,
        } => {
            let base = match config {
                Some(p) => read_config(&p)?,
                None => ScenarioConfig::paper(),
            };
            sweep_command(base, &run, seeds, &noise_mm, workers)
        }
        Command::Check { config, out, full } => {
            let base = match config {
                // structure only: bad gains should fail criteria, by name
                Some(p) => read_config(&p)?,
                None => ScenarioConfig::paper(),
            };
            check_command(&base, &out, if full { Scale::Full } else { Scale::Desk })
        }
    }
}

fn prepare(mut base: ScenarioConfig, args: &RunArgs) -> Result<(ScenarioConfig, Vec<IntegratorMode>), CliError> {
    apply_overrides(&mut base, args.dt, args.steps, args.seed);
    validate(&base)?;
    let modes = args.mode.map_or_else(|| vec![base.mode], ModeArg::modes);
    Ok((base, modes))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))
}

fn summarize(label: &str, run: &ScenarioRun, seconds: f64) {
    let e = run.terminal.errors;
    println!(
        "{label}: {} steps in {seconds:.3} s; terminal attitude error {:.3e} rad, position error {:.3e} m, \
         max Newton iterations {}",
        run.records.len(),
        e.attitude,
        e.position.norm(),
        run.max_newton_iterations()
    );
}

fn run_command(base: ScenarioConfig, args: &RunArgs) -> Result<(), CliError> {
    let (config, modes) = prepare(base, args)?;
    create_dir(&args.out)?;
    let cfg_path = args.out.join("config.toml");
    std::fs::write(&cfg_path, to_toml(&config)).map_err(io_error(&cfg_path))?;
    for mode in modes {
        let mut c = config.clone();
        c.mode = mode;
        let start = Instant::now();
        let run = run_scenario(&c)?;
        summarize(&mode.to_string(), &run, start.elapsed().as_secs_f64());
        let stem = format!("run_{mode}");
        let csv = args.out.join(format!("{stem}.csv"));
        write_run_csv(&run.records, &csv)?;
        println!("  wrote {}", csv.display());
        if !args.no_plots {
            for p in emit_plots(&run.records, &args.out, &stem)? {
                println!("  wrote {}", p.display());
            }
        }
    }
    Ok(())
}

struct SweepJob {
    id: String,
    noise_mm: Option<f64>,
    seed: u64,
    config: ScenarioConfig,
}

#[derive(Debug)]
struct SweepRow {
    id: String,
    noise_mm: Option<f64>,
    seed: u64,
    mode: IntegratorMode,
    terminal_attitude: f64,
    terminal_position: f64,
    steady_attitude: f64,
    steady_position: f64,
    max_newton: usize,
}

/// Averaging window at the end of a run for the steady-state columns.
const STEADY_WINDOW_S: f64 = 2.0;

fn sweep_command(
    base: ScenarioConfig,
    args: &RunArgs,
    seeds: u64,
    noise_mm: &[f64],
    workers: Option<usize>,
) -> Result<(), CliError> {
    let (config, modes) = prepare(base, args)?;
    if seeds == 0 {
        return Err(CliError::Field {
            field: "--seeds".into(),
            message: "must be at least 1".into(),
        });
    }
    let widths: Vec<Option<f64>> = if noise_mm.is_empty() {
        vec![None]
    } else {
        noise_mm.iter().map(|w| Some(*w)).collect()
    };
    let mut jobs = Vec::new();
    for &w in &widths {
        for s in 0..seeds {
            for &mode in &modes {
                let mut c = config.clone();
                c.mode = mode;
                c.noise.seed = config.noise.seed + s;
                if let Some(mm) = w {
                    c.noise.support_width = mm * 1e-3;
                    c.noise.velocity_support_width = mm * 1e-3;
                }
                validate(&c)?;
                let width = w.map_or_else(|| "cfg".to_string(), |mm| format!("{mm}mm"));
                jobs.push(SweepJob {
                    id: format!("w{width}_s{}_{mode}", c.noise.seed),
                    noise_mm: w,
                    seed: c.noise.seed,
                    config: c,
                });
            }
        }
    }
    create_dir(&args.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Field {
            field: "--workers".into(),
            message: e.to_string(),
        })?;
    let out = &args.out;
    let start = Instant::now();
    let rows: Vec<Result<SweepRow, CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let run = run_scenario(&job.config)?;
                write_run_csv(&run.records, &out.join(format!("sweep_{}.csv", job.id)))?;
                let from = job.config.duration - STEADY_WINDOW_S.min(0.2 * job.config.duration);
                Ok(SweepRow {
                    id: job.id.clone(),
                    noise_mm: job.noise_mm,
                    seed: job.seed,
                    mode: job.config.mode,
                    terminal_attitude: run.terminal.errors.attitude,
                    terminal_position: run.terminal.errors.position.norm(),
                    steady_attitude: run.mean_since(from, |r| r.errors.attitude),
                    steady_position: run.mean_since(from, |r| r.errors.position.norm()),
                    max_newton: run.max_newton_iterations(),
                })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let path = out.join("sweep_summary.csv");
    let csv_err = |source| CliError::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record([
        "run_id",
        "noise_width_mm",
        "seed",
        "mode",
        "terminal_attitude_rad",
        "terminal_position_m",
        "steady_attitude_rad",
        "steady_position_m",
        "max_newton_iters",
    ])
    .map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            r.id.clone(),
            r.noise_mm.map_or_else(|| format!("{:.16e}", config.noise.support_width * 1e3), |v| format!("{v:.16e}")),
            r.seed.to_string(),
            r.mode.to_string(),
            format!("{:.16e}", r.terminal_attitude),
            format!("{:.16e}", r.terminal_position),
            format!("{:.16e}", r.steady_attitude),
            format!("{:.16e}", r.steady_position),
            r.max_newton.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_error(&path))?;
    println!(
        "{} runs in {:.2} s; summary in {}",
        rows.len(),
        start.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub scale: String,
    pub passed: bool,
    pub passed_count: usize,
    pub total: usize,
    pub run_audit: RunAudit,
    pub criteria: Vec<CriterionJson>,
}

/// One run of the configured scenario, for the record.
#[derive(Debug, Serialize)]
pub struct RunAudit {
    pub steps: Option<usize>,
    pub newton_max_iterations: Option<usize>,
    pub newton_max_residual: Option<f64>,
    pub terminal_attitude_rad: Option<f64>,
    pub terminal_position_m: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct CriterionJson {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl From<&CriterionReport> for CriterionJson {
    fn from(r: &CriterionReport) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        CriterionJson {
            id: r.id,
            name: r.name.to_string(),
            passed: r.passed,
            measured: finite(r.measured),
            threshold: finite(r.threshold),
            detail: r.detail.clone(),
        }
    }
}

fn audit(base: &ScenarioConfig) -> RunAudit {
    match validate(base).and_then(|_| run_scenario(base).map_err(CliError::from)) {
        Ok(run) => RunAudit {
            steps: Some(run.records.len()),
            newton_max_iterations: Some(run.max_newton_iterations()),
            newton_max_residual: Some(run.max_newton_residual()),
            terminal_attitude_rad: Some(run.terminal.errors.attitude),
            terminal_position_m: Some(run.terminal.errors.position_raw.norm()),
            error: None,
        },
        Err(e) => RunAudit {
            steps: None,
            newton_max_iterations: None,
            newton_max_residual: None,
            terminal_attitude_rad: None,
            terminal_position_m: None,
            error: Some(e.to_string()),
        },
    }
}

pub fn check_report(base: &ScenarioConfig, scale: Scale) -> CheckReport {
    let reports: Vec<CriterionReport> = CRITERIA
        .iter()
        .map(|(id, _)| {
            let r = run_criterion(*id, base, scale);
            println!("{r}");
            r
        })
        .collect();
    let passed_count = reports.iter().filter(|r| r.passed).count();
    CheckReport {
        scale: match scale {
            Scale::Full => "full",
            Scale::Desk => "desk",
        }
        .into(),
        passed: passed_count == reports.len(),
        passed_count,
        total: reports.len(),
        run_audit: audit(base),
        criteria: reports.iter().map(CriterionJson::from).collect(),
    }
}

fn check_command(base: &ScenarioConfig, out: &Path, scale: Scale) -> Result<(), CliError> {
    let report = check_report(base, scale);
    create_dir(out)?;
    let path = out.join("check_report.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&path, json).map_err(io_error(&path))?;
    let a = &report.run_audit;
    match a.newton_max_iterations {
        Some(n) => println!("run audit: {} steps, max Newton iterations {n}", a.steps.unwrap_or(0)),
        None => println!("run audit: {}", a.error.as_deref().unwrap_or("not run")),
    }
    println!("{} of {} criteria passed; report in {}", report.passed_count, report.total, path.display());
    if report.passed {
        Ok(())
    } else {
        Err(CliError::ChecksFailed {
            failed: report.total - report.passed_count,
            total: report.total,
        })
    }
}
