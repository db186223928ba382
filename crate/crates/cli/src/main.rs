use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;
mod output;
mod svg;

use config::Invocation;

/// Batch front-end for the Hawkes impact toolkit.
#[derive(Debug, Parser)]
#[command(name = "him", version, about)]
struct Cli {
    /// JSON run file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the run file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the grid step of the run file.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Simulate an impulsive HIM: one event stream and a Monte Carlo impact curve.
    Simulate,
    /// Analytic impact curves.
    Curve,
    /// Impact estimators on metaorder data.
    Estimate,
    /// Calibrate the model to empirical impact curves.
    Fit,
    /// Daily post-execution profiles.
    Daily,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Curve => "curve",
            Command::Estimate => "estimate",
            Command::Fit => "fit",
            Command::Daily => "daily",
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let inv = Invocation { config: cli.config.clone(), seed: cli.seed, dt: cli.dt };
    let outputs = match cli.command {
        Command::Simulate => commands::simulate::run(&inv)?,
        Command::Curve => commands::curve::run(&inv)?,
        Command::Estimate => commands::estimate::run(&inv)?,
        Command::Fit => commands::fit::run(&inv)?,
        Command::Daily => commands::daily::run(&inv)?,
    };
    outputs.commit(&cli.out)?;
    for name in outputs.names() {
        println!("{}", cli.out.join(name).display());
    }
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use hawkes_impact::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidParameter { .. } => "invalid_parameter",
                E::GridMismatch { .. } => "grid_mismatch",
                E::NotSummable(_) => "not_summable",
                E::Unstable(_) => "unstable",
                E::InsufficientData(_) => "insufficient_data",
                E::Degenerate(_) => "degenerate",
                E::NonPositive(_) => "non_positive",
                E::OutOfRange(_) => "out_of_range",
                E::NoConvergence(_) => "no_convergence",
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "invalid_config";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}");
            eprintln!("error: {message}");
            let report = json!({
                "error": { "command": cli.command.name(), "kind": error_kind(&err), "message": message }
            });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
