//! Command-line experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Config;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(
    name = "snapfilter",
    version,
    about = "Filter reaction networks from exact snapshot observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method over replicate trials and write result tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 picks one per core.
        #[arg(long, env = "SNAPFILTER_THREADS", default_value_t = 0)]
        threads: usize,
    },
    /// Check a config without simulating.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<Config, ExitCode> {
    Config::load(path).map_err(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn check(cfg: &Config) -> Result<(), ExitCode> {
    let issues = validate::validate(cfg);
    if issues.is_empty() {
        return Ok(());
    }
    for i in &issues {
        eprintln!("invalid: {i}");
    }
    eprintln!("{} problem(s) found", issues.len());
    Err(ExitCode::from(EXIT_VALIDATION))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => load(&config)
            .and_then(|cfg| check(&cfg))
            .map(|_| println!("OK")),
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => load(&config).and_then(|cfg| {
            check(&cfg)?;
            if threads > 0 && !snapfilter::exec::init_threads(threads) {
                eprintln!("warning: thread pool already initialised; --threads ignored");
            }
            let seed = seed.unwrap_or(cfg.trials.seed);
            match run::run(&cfg, &out, seed, |msg| eprintln!("{msg}")) {
                Ok(summary) => {
                    let failed = summary.failed_rows();
                    for r in &failed {
                        eprintln!(
                            "error: case {}, method {}: every trial was all-rejected",
                            r.case, r.method
                        );
                    }
                    if failed.is_empty() {
                        println!("wrote {}", out.display());
                        Ok(())
                    } else {
                        Err(ExitCode::from(EXIT_RUNTIME))
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    Err(ExitCode::from(EXIT_RUNTIME))
                }
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
