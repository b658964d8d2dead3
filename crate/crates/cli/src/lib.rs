//! Command-line front end for `tailcmp`.
//!
//! Exit status: 0 when every check holds or is inconclusive, 1 when any check
//! is violated, 2 on configuration or hypothesis errors.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{
    ExperimentConfig, ExperimentKind, NormingSource, Overrides, PowerLaw, SequenceSource,
};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "tailcmp",
    version,
    about = "Tail comparison inequality experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment described by a config file.
    Run(RunArgs),
    /// Run a sweep of inequality checks in parallel.
    Sweep(RunArgs),
    /// Tabulate the interpolated norming functions and their ratio.
    Construct(ConstructArgs),
    /// Check a config without running it.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Override a top-level key, e.g. `--set R=20000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            confidence: self.confidence,
            set: self.set.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    /// Config with a `norming` section; otherwise use the power-law flags.
    #[arg(long, conflicts_with_all = ["a_power", "b_power"])]
    pub config: Option<PathBuf>,
    /// `a_n = n^x`.
    #[arg(long, requires = "b_power")]
    pub a_power: Option<f64>,
    /// `b_n = n^x`.
    #[arg(long, requires = "a_power")]
    pub b_power: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub n_max: usize,
    #[arg(long)]
    pub grid_per_unit: Option<usize>,
    /// Write artifacts here; the table goes to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
}

fn construct_config(args: &ConstructArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let mut c = config::load(path, &Overrides::default())?;
            c.experiment = ExperimentKind::Construct;
            c
        }
        None => {
            let (Some(a), Some(b)) = (args.a_power, args.b_power) else {
                return Err(CliError::MissingKey("norming".into()));
            };
            let doc = serde_json::json!({"schema_version": config::SCHEMA_VERSION, "experiment": "construct"});
            let mut c: ExperimentConfig = serde_json::from_value(doc)
                .map_err(|e| CliError::invalid("construct", e.to_string()))?;
            c.norming = Some(NormingSource {
                a: SequenceSource::Power(PowerLaw { power: a }),
                b: SequenceSource::Power(PowerLaw { power: b }),
                n_max: Some(args.n_max),
            });
            c
        }
    };
    if args.grid_per_unit.is_some() {
        config.grid_per_unit = args.grid_per_unit;
    }
    config.out = args.out.clone();
    Ok(config)
}

/// Runs a parsed command line and returns the process exit status.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => {
            let config = config::load(&args.config, &args.overrides())?;
            let outcome = run::run(&config)?;
            report(&outcome);
            Ok(outcome.exit_code())
        }
        Command::Sweep(args) => {
            let config = config::load(&args.config, &args.overrides())?;
            if config.experiment != ExperimentKind::Sweep {
                return Err(CliError::invalid(
                    "experiment",
                    "the sweep command expects `sweep`",
                ));
            }
            let outcome = run::run(&config)?;
            report(&outcome);
            Ok(outcome.exit_code())
        }
        Command::Construct(args) => {
            let config = construct_config(&args)?;
            if config.out.is_some() {
                let outcome = run::run(&config)?;
                report(&outcome);
            } else {
                let source = config.require(&config.norming, "norming")?;
                let pair = source.build(1)?;
                let functions = tailcmp::FunctionPair::build(&pair)?;
                let per_unit = config.grid_per_unit.unwrap_or(run::DEFAULT_GRID_PER_UNIT);
                let table = output::construct_table(&functions, per_unit)?;
                std::io::stdout()
                    .write_all(table.into_string().as_bytes())
                    .map_err(|e| CliError::io("<stdout>", e))?;
            }
            Ok(0)
        }
        Command::Validate(args) => {
            let config = config::load(&args.config, &Overrides::default())?;
            run::dry_run(&config)?;
            println!(
                "{}: ok ({})",
                args.config.display(),
                config.experiment.as_str()
            );
            Ok(0)
        }
    }
}

fn report(outcome: &run::Outcome) {
    let verdict = outcome.verdict.map_or("done", |v| v.as_str());
    eprintln!("{verdict}: wrote {}", outcome.out_dir.display());
}
