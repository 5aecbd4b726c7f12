//! Config-driven experiments: certify, run, sweep and convergence studies.
//!
//! Exit codes: 0 pass, 1 hypothesis failure, 2 envelope violation,
//! 3 configuration error.

// Negated float comparisons reject NaN inputs on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;

pub use commands::{
    cmd_certify, cmd_converge, cmd_run, cmd_sweep, ConvergeReport, RunOptions, RunOutcome, RunRecord, SweepRow,
    EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_PASS, EXIT_VIOLATION,
};
pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cgle_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "cgle", version, about = "Feedback-stabilized Ginzburg-Landau experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the hypothesis table for a configuration.
    Certify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate, write the trajectory CSV and run record, check the envelope.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Run even when hypotheses are violated.
        #[arg(long)]
        force: bool,
        /// Relative slack for the envelope check.
        #[arg(long)]
        slack: Option<f64>,
    },
    /// Certify (and simulate) over a grid of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        /// Evenly spaced values `start:stop:count`.
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
        #[arg(long)]
        certify_only: bool,
    },
    /// Errors against the exact linear solution for a list of steps.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        dt: Vec<f64>,
    },
}

/// Parses `start:stop:count` into `count` evenly spaced values.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("bad range {text:?}, expected start:stop:count"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    })
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Certify { config } => cmd_certify(&ExperimentConfig::load(&config)?, out),
        Command::Run {
            config,
            out: out_dir,
            force,
            slack,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let opts = RunOptions { out_dir, force, slack };
            Ok(cmd_run(&cfg, &opts, out)?.exit_code)
        }
        Command::Sweep {
            config,
            out: out_dir,
            param,
            mut values,
            range,
            certify_only,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            if let Some(r) = range {
                values.extend(parse_range(&r)?);
            }
            let opts = RunOptions {
                out_dir,
                ..Default::default()
            };
            cmd_sweep(&cfg, &param, &values, certify_only, &opts, out)?;
            Ok(EXIT_PASS)
        }
        Command::Converge { config, out: out_dir, dt } => {
            let cfg = ExperimentConfig::load(&config)?;
            let opts = RunOptions {
                out_dir,
                ..Default::default()
            };
            Ok(cmd_converge(&cfg, &dt, &opts, out)?.exit_code)
        }
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
