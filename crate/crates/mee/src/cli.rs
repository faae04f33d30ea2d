//! Command-line dispatcher: binds config files to the experiment runners and
//! data utilities.
//!
//! Every runner invocation gets its own output directory holding the
//! effective (post-override) config, the result CSVs, and a run manifest, so
//! each reported number is traceable to the inputs that produced it. Exit
//! codes: 0 success, 2 config/usage error, 1 runtime failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, ExperimentConfig};
use crate::experiments::{
    run_comparison, run_consistency_sweep, run_h_decay_sweep, run_mean_adjustment_check,
};
use crate::learner::{adjusted_estimator, mean_adjustment, minimize_mee, MeeProblem, Sample};
use crate::oracle::generate_sample;
use crate::windowing::{validate_window, WindowingFunction};

#[derive(Debug, Parser)]
#[command(
    name = "mee",
    version,
    about = "Minimum-error-entropy regression toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Suppress log output.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Worker threads for trial execution (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic sample from the configured model.
    Gen(RunArgs),
    /// Fit the entropy minimizer to a sample file.
    Fit(RunArgs),
    /// Consistency sweep over sample sizes.
    SweepM(RunArgs),
    /// Windowing-residual decay sweep over an explicit h grid.
    SweepH(RunArgs),
    /// Paired entropy-vs-least-squares comparison on shared samples.
    Compare(RunArgs),
    /// Mean-adjustment accuracy check across sample sizes.
    AdjustCheck(RunArgs),
    /// Validate a built-in windowing function and print the report.
    ValidateWindow {
        /// Window name: gaussian | rational.
        #[arg(long)]
        window: String,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Config file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Config overrides as dotted key=value pairs, applied after parsing.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad config or arguments: exit 2.
    Config(String),
    /// Failure while running: exit 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Run one parsed invocation to completion.
pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // ignore failure: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::ValidateWindow { window } => {
            let w = WindowingFunction::by_name(&window).ok_or_else(|| {
                config_err(format!(
                    "unknown window `{window}` (expected gaussian|rational)"
                ))
            })?;
            let report = validate_window(&w);
            print!("window `{}`: {report}", w.name());
            Ok(())
        }
        Command::Gen(args) => run_with_outputs(&args, "gen", |cfg, out| {
            let spec = cfg
                .gen
                .as_ref()
                .ok_or_else(|| config_err("config needs a `gen` section with `m`"))?;
            if spec.m < 1 {
                return Err(config_err("gen.m must be at least 1"));
            }
            let model = cfg.model.build().map_err(config_err)?;
            let sample = generate_sample(&model, spec.m, cfg.master_seed).map_err(runtime_err)?;
            let path = out.join("sample.csv");
            sample.write_csv(&path).map_err(runtime_err)?;
            log::info!("wrote {} observations to {}", sample.len(), path.display());
            Ok(())
        }),
        Command::Fit(args) => run_with_outputs(&args, "fit", |cfg, out| {
            let spec = cfg
                .fit
                .as_ref()
                .ok_or_else(|| config_err("config needs a `fit` section with `sample`"))?;
            let sample = Sample::read_csv(Path::new(&spec.sample)).map_err(config_err)?;
            let space = cfg.hypothesis.build().map_err(config_err)?;
            let window = cfg.window().map_err(config_err)?;
            let h = match spec.h {
                Some(h) => h,
                None => {
                    let model = cfg.model.build().map_err(config_err)?;
                    cfg.h_schedule
                        .h_for(sample.len(), 0, 1, &model)
                        .map_err(config_err)?
                }
            };
            let prob = MeeProblem::new(&sample, &space, h, &window).map_err(config_err)?;
            let settings = cfg.optimizer.clone().with_seed(cfg.master_seed);
            let fit = minimize_mee(&prob, &settings).map_err(runtime_err)?;
            let adjust = mean_adjustment(&fit.predictor, &space, &sample).map_err(runtime_err)?;
            let tilde = adjusted_estimator(&fit.predictor, &space, &sample).map_err(runtime_err)?;
            let result = serde_json::json!({
                "coefficients": fit.predictor.coefficients,
                "offset": fit.predictor.offset,
                "adjusted_offset": tilde.offset,
                "mean_adjustment": adjust,
                "h": h,
                "m": sample.len(),
                "diagnostics": {
                    "objective": fit.diagnostics.objective,
                    "iterations": fit.diagnostics.iterations,
                    "restart": fit.diagnostics.restart,
                    "converged": fit.diagnostics.converged,
                },
            });
            write_json(&out.join("predictor.json"), &result)?;
            log::info!(
                "fit m={} h={h}: objective {:.6e} after {} iterations",
                sample.len(),
                fit.diagnostics.objective,
                fit.diagnostics.iterations
            );
            Ok(())
        }),
        Command::SweepM(args) => run_with_outputs(&args, "sweep-m", |cfg, out| {
            let o = run_consistency_sweep(cfg).map_err(runtime_err)?;
            o.write_to(out).map_err(runtime_err)?;
            log_failures(o.failures.len());
            Ok(())
        }),
        Command::Compare(args) => run_with_outputs(&args, "compare", |cfg, out| {
            let o = run_comparison(cfg).map_err(runtime_err)?;
            o.write_to(out).map_err(runtime_err)?;
            log_failures(o.failures.len());
            Ok(())
        }),
        Command::AdjustCheck(args) => run_with_outputs(&args, "adjust-check", |cfg, out| {
            let o = run_mean_adjustment_check(cfg).map_err(runtime_err)?;
            o.write_to(out).map_err(runtime_err)?;
            log_failures(o.failures.len());
            Ok(())
        }),
        Command::SweepH(args) => run_with_outputs(&args, "sweep-h", |cfg, out| {
            let o = run_h_decay_sweep(cfg).map_err(runtime_err)?;
            o.write_to(out).map_err(runtime_err)?;
            Ok(())
        }),
    }
}

fn log_failures(n: usize) {
    if n > 0 {
        log::warn!("{n} trial(s) failed; see summary.csv counts");
    }
}

/// Shared runner plumbing: load + override config, create the output
/// directory, echo the effective config, run, and write the manifest.
fn run_with_outputs(
    args: &RunArgs,
    subcommand: &str,
    body: impl FnOnce(&ExperimentConfig, &Path) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = load_config(&args.config, &args.set, args.seed).map_err(config_err)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| runtime_err(format!("cannot create {}: {e}", args.out.display())))?;
    let effective = serde_json::to_value(&cfg).map_err(runtime_err)?;
    write_json(&args.out.join("effective_config.json"), &effective)?;

    body(&cfg, &args.out)?;

    let manifest = serde_json::json!({
        "subcommand": subcommand,
        "config": args.config.display().to_string(),
        "master_seed": cfg.master_seed,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_ms": started.elapsed().as_millis() as u64,
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime_err)?;
    let _ = writeln!(text);
    std::fs::write(path, text)
        .map_err(|e| runtime_err(format!("cannot write {}: {e}", path.display())))
}
