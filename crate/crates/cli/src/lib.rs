//! Command-line front-end of the crossing-probability engine.
//!
//! `bcross eval|compare|diagnose|sweep --config run.json` reads a JSON run
//! config (schema in `docs/config.schema.json`) and writes a JSON or CSV report.
//! Exit codes: 0 on success, 2 for invalid configs, 3 for numeric failures.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

pub use config::{Format, MethodName, MethodSpec, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "bcross", version, about = "Boundary crossing probabilities of drifted Wiener processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every configured method.
    Eval(Common),
    /// Tabulate every method against the reference method.
    Compare(Common),
    /// Decomposition statistics and factorization gaps.
    Diagnose(Common),
    /// Evaluate the methods over a grid of config values.
    Sweep(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Seed for all Monte Carlo methods; overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report file; overrides `output.path`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report format; overrides `output.format`.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Override a config field, e.g. `--set problem.sigma=2`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,
    /// Add wall-clock `runtime_ms` to records (the output is then not reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

impl Common {
    fn overrides(&self) -> CliResult<Vec<(String, Value)>> {
        let mut out = self
            .set
            .iter()
            .map(|s| config::parse_assignment(s))
            .collect::<CliResult<Vec<_>>>()?;
        if let Some(seed) = self.seed {
            out.push(("seed".into(), Value::from(seed)));
        }
        if let Some(f) = self.format {
            let name = match f {
                FormatArg::Json => "json",
                FormatArg::Csv => "csv",
            };
            out.push(("output.format".into(), Value::from(name)));
        }
        if let Some(path) = &self.out {
            out.push(("output.path".into(), Value::from(path.to_string_lossy().into_owned())));
        }
        Ok(out)
    }
}

/// Runs a command on config text and returns the rendered report with its destination.
pub fn execute(command: &Command, text: &str) -> CliResult<(String, Option<String>)> {
    let common = match command {
        Command::Eval(c) | Command::Compare(c) | Command::Diagnose(c) | Command::Sweep(c) => c,
    };
    let (root, config) = config::load(text, &common.overrides()?)?;
    let format = config.output.format;
    let rendered = match command {
        Command::Eval(_) => report::render_eval(&commands::eval(&config, common.timing)?, format)?,
        Command::Compare(_) => report::render_compare(&commands::compare(&config, common.timing)?, format)?,
        Command::Diagnose(_) => report::render_diagnose(&commands::diagnose(&config)?, format)?,
        Command::Sweep(_) => report::render_sweep(&commands::sweep(&root, &config, common.timing)?, format)?,
    };
    Ok((rendered, config.output.path.clone()))
}

/// Full CLI run; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let common = match &cli.command {
        Command::Eval(c) | Command::Compare(c) | Command::Diagnose(c) | Command::Sweep(c) => c,
    };
    let result = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Validation {
            pointer: None,
            message: format!("cannot read {}: {e}", common.config.display()),
        })
        .and_then(|text| execute(&cli.command, &text))
        .and_then(|(rendered, path)| match path {
            Some(p) => std::fs::write(&p, rendered).map_err(|e| CliError::Io(format!("{p}: {e}"))),
            None => {
                print!("{rendered}");
                Ok(())
            }
        });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
