//! `igabem` experiment driver.
//!
//! ```text
//! igabem run --config slit.json --out runs/slit [--with-error-proxy] [--dump-indicators]
//! igabem geometry heart > heart.json
//! igabem selftest
//! ```
//!
//! Exit codes: 0 ok, 1 I/O failure, 2 configuration error, 3 numerical failure.

mod config;
mod run;
mod selftest;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use igabem::geometry::{builtin_geometry, GEOMETRY_NAMES};

use crate::config::RunConfig;
use crate::run::{cmd_run, RunOptions};
use crate::selftest::cmd_selftest;

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "igabem", version, about = "Adaptive isogeometric BEM for the 2D Laplace equation")]
struct Cli {
    /// Maximal number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an adaptive (or, with theta = 1, uniform) convergence experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also compute the error against the uniformly refined solution.
        #[arg(long)]
        with_error_proxy: bool,
        /// Write the nodal indicators of every level.
        #[arg(long)]
        dump_indicators: bool,
    },
    /// Print a built-in geometry as JSON.
    Geometry {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn geometry(name: &str, out: Option<PathBuf>) -> Result<(), Failure> {
    let curve = builtin_geometry(name)
        .map_err(|_| Failure::Config(format!("unknown geometry '{name}', expected one of {}", GEOMETRY_NAMES.join(", "))))?;
    let text = serde_json::to_string_pretty(&curve.to_record(Some(name))).map_err(|e| Failure::Io(e.to_string()))?;
    match out {
        Some(path) => fs::write(&path, text + "\n").map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Run {
            config,
            out,
            with_error_proxy,
            dump_indicators,
        } => {
            let cfg = RunConfig::from_path(&config).map_err(Failure::Config)?;
            let opts = RunOptions {
                out,
                with_error_proxy,
                dump_indicators,
            };
            cmd_run(&cfg, &opts).map(|_| ())
        }
        Command::Geometry { name, out } => geometry(&name, out),
        Command::Selftest => {
            if cmd_selftest() {
                Ok(())
            } else {
                Err(Failure::Numerical("selftest failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("igabem: {e}");
            ExitCode::from(e.code())
        }
    }
}
