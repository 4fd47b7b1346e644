//! `llab`: batch front end for constructions, samplers, generalized integer
//! systems, zeta numerics, deviation scans and report merging.

mod config;
mod params;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use serde::Serialize;

use config::{config_err, CliError, CommandName, ExperimentConfig};
use params::*;

#[derive(Debug, Parser)]
#[command(name = "llab", version, about = "Exponential-sum and zeta experiments with reproducible configs")]
struct Cli {
    /// Run a saved config or manifest.json; excludes every other flag except --threads.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; LLAB_THREADS is used when absent.
    #[arg(long)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Build a certified counterexample sequence.
    Construct {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ConstructParams,
    },
    /// Draw a random sequence or run a Monte Carlo study.
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: SampleParams,
    },
    /// Generate a generalized integer system and its counting functions.
    Beurling {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: BeurlingParams,
    },
    /// Evaluate zeta, its log-derivative, Perron inversions or line scans.
    Zeta {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ZetaParams,
    },
    /// Deviation of a sequence's exponential sums over an (x, t) grid.
    Scan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ScanParams,
    },
    /// Merge scan or Monte Carlo tables and summarize them.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ReportParams,
    },
}

fn to_config<P: Serialize>(command: CommandName, common: Common, params: &P) -> ExperimentConfig {
    ExperimentConfig {
        command,
        params: serde_json::to_value(params).expect("params serialize"),
        seed: common.seed,
        output_dir: common.output_dir,
        format: common.format,
    }
}

fn config_from_cmd(cmd: Cmd) -> ExperimentConfig {
    match cmd {
        Cmd::Construct { common, params } => to_config(CommandName::Construct, common, &params),
        Cmd::Sample { common, params } => to_config(CommandName::Sample, common, &params),
        Cmd::Beurling { common, params } => to_config(CommandName::Beurling, common, &params),
        Cmd::Zeta { common, params } => to_config(CommandName::Zeta, common, &params),
        Cmd::Scan { common, params } => to_config(CommandName::Scan, common, &params),
        Cmd::Report { common, params } => to_config(CommandName::Report, common, &params),
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("LLAB_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| config_err(format!("LLAB_THREADS = '{v}' is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(config_err("thread count must be at least 1"));
    }
    Ok(n)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let config = match (cli.config, cli.command) {
        (Some(path), None) => ExperimentConfig::load(&path)?,
        (None, Some(cmd)) => config_from_cmd(cmd),
        (Some(_), Some(_)) => return Err(config_err("--config cannot be combined with a subcommand or its flags")),
        (None, None) => {
            let _ = Cli::command().print_help();
            return Err(config_err("a subcommand or --config is required"));
        }
    };
    match thread_count(cli.threads)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| config_err(e.to_string()))?
            .install(|| run::run(&config)),
        None => run::run(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
