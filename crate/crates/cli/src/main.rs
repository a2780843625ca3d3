//! `learnctl` command-line front end.
//!
//! Exit codes: 0 success, 1 run or certificate failure, 2 invalid
//! configuration or arguments, 3 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use learnctl::experiment::{run_closed_loop, summarize, write_artifacts, ExperimentConfig, OracleKind, Summary};
use learnctl::{ConfigError, ExperimentError};
use log::{error, info};
use rayon::prelude::*;
use serde::Serialize;

const EXIT_RUN: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

/// Largest accepted `‖PA + AᵀP + Q‖_F / ‖Q‖_F` over all certificates.
const CERTIFICATE_TOLERANCE: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "learnctl", version, about = "Learning-based trajectory tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one closed-loop experiment from a config file.
    Simulate(RunArgs),
    /// Run the reference configuration (14 s, GP oracle, decaying gains).
    ReproducePaper(ReproduceArgs),
    /// Run `--runs` experiments with seeds `seed, seed + 1, …` in parallel.
    Sweep(SweepArgs),
    /// Parse and validate a config file, or print the defaults.
    ValidateConfig(ValidateArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config; omitted keys take their defaults (see `validate-config --print-defaults`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for measurement noise and hyperparameter search; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Disturbance model used by the controller: gp, zero, linear or truth.
    #[arg(long)]
    oracle: Option<OracleKind>,
    /// Suppress progress and the summary line.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(long, default_value = "out/reproduce")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of runs.
    #[arg(long, default_value_t = 10)]
    runs: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the full default configuration as TOML.
    #[arg(long)]
    print_defaults: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = if matches!(e, ConfigError::Read { .. }) { EXIT_IO } else { EXIT_CONFIG };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::Config(_) => EXIT_CONFIG,
            ExperimentError::Io { .. } => EXIT_IO,
            _ => EXIT_RUN,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(oracle) = args.oracle {
        cfg.oracle = oracle;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_certificates(summary: &Summary) -> Result<(), Failure> {
    if summary.max_certificate_residual <= CERTIFICATE_TOLERANCE && summary.min_p_eigenvalue > 0.0 {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_RUN,
            message: format!(
                "certificate check failed: residual {:.3e}, min eig(P) {:.3e}",
                summary.max_certificate_residual, summary.min_p_eigenvalue
            ),
        })
    }
}

fn describe(s: &Summary) -> String {
    format!(
        "seed {} ({}): ratio {:.2}, max |z0| after {} s {:.4}, bound {:.4} ({}), {} points, {:.1} s",
        s.seed,
        s.oracle,
        s.metrics.improvement_ratio,
        s.bound_check_from,
        s.max_z0_after_check,
        s.bound,
        if s.bound_holds { "holds" } else { "violated" },
        s.training_points,
        s.wall_clock_s
    )
}

/// Runs `cfg` and writes its artifacts into `dir`.
fn run_one(cfg: &ExperimentConfig, dir: &Path) -> Result<Summary, Failure> {
    info!("seed {}: simulating {} s with the {} oracle", cfg.seed, cfg.sim.t_end, cfg.oracle);
    let out = run_closed_loop(cfg).map_err(|f| Failure::from(f.error))?;
    let summary = summarize(cfg, &out);
    let artifacts = write_artifacts(dir, cfg, &out, &summary)?;
    info!("seed {}: wrote {} files to {}", cfg.seed, artifacts.files.len(), dir.display());
    check_certificates(&summary)?;
    Ok(summary)
}

fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let summary = run_one(&cfg, &cfg.output.dir)?;
    if !args.quiet {
        println!("{}", describe(&summary));
    }
    Ok(())
}

fn reproduce(args: &ReproduceArgs) -> Result<(), Failure> {
    let cfg = ExperimentConfig {
        seed: args.seed,
        ..ExperimentConfig::default()
    };
    let summary = run_one(&cfg, &args.out)?;
    if !args.quiet {
        println!("{}", describe(&summary));
        println!("gain norms: {:?}", summary.metrics.gain_norms);
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepReport {
    runs: usize,
    bound_holds: usize,
    ratio_at_least_5: usize,
    summaries: Vec<Summary>,
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let base = load_config(&args.run)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure {
            code: EXIT_RUN,
            message: e.to_string(),
        })?;
    let results: Vec<Result<Summary, Failure>> = pool.install(|| {
        (0..args.runs)
            .into_par_iter()
            .map(|i| {
                let cfg = ExperimentConfig {
                    seed: base.seed.wrapping_add(i),
                    ..base.clone()
                };
                let dir = base.output.dir.join(format!("run_{i:03}"));
                run_one(&cfg, &dir).inspect_err(|e| error!("run {i} (seed {}): {}", cfg.seed, e.message))
            })
            .collect()
    });

    let mut summaries = Vec::with_capacity(results.len());
    let mut first_failure = None;
    for r in results {
        match r {
            Ok(s) => summaries.push(s),
            Err(e) => {
                first_failure.get_or_insert(e);
            }
        }
    }
    let report = SweepReport {
        runs: summaries.len(),
        bound_holds: summaries.iter().filter(|s| s.bound_holds).count(),
        ratio_at_least_5: summaries.iter().filter(|s| s.metrics.improvement_ratio >= 5.0).count(),
        summaries,
    };
    let path = base.output.dir.join("sweep.json");
    learnctl::experiment::atomic_write(&path, |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    if !args.run.quiet {
        for s in &report.summaries {
            println!("{}", describe(s));
        }
        println!(
            "{} runs: bound holds in {}, improvement ratio >= 5 in {}",
            report.runs, report.bound_holds, report.ratio_at_least_5
        );
    }
    first_failure.map_or(Ok(()), Err)
}

fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    if args.print_defaults {
        print!("{}", ExperimentConfig::default().to_toml_string());
        return Ok(());
    }
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    println!(
        "ok: {} steps of {} s, {} switches, oracle {}",
        cfg.steps(),
        cfg.sim.dt,
        cfg.n_end(),
        cfg.oracle
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let quiet = match &cli.command {
        Command::Simulate(a) => a.quiet,
        Command::ReproducePaper(a) => a.quiet,
        Command::Sweep(a) => a.run.quiet,
        Command::ValidateConfig(_) => false,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "warn" } else { "info" }))
        .init();

    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::ReproducePaper(a) => reproduce(a),
        Command::Sweep(a) => sweep(a),
        Command::ValidateConfig(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
