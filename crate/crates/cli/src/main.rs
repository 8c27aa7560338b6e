//! `bassmbb`: solve for the Bass measure, simulate the Bass martingale and
//! run the consistency checks from the command line.
//!
//! Exit codes: 0 success, 1 I/O or validation failure, 2 the infimum is not
//! attained (α spreads), 3 iteration budget exhausted, 4 a check failed.

mod checks;
mod commands;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "bassmbb", version, about = "Bass martingales between discrete marginals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize the Bass functional; writes report.json, alpha_hat.csv, trace.csv.
    Solve(Common),
    /// Simulate the Bass martingale of a previous solve in --out.
    Simulate(Common),
    /// Run one of the consistency checks.
    Check {
        which: CheckKind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Duality,
    Convexity,
    Rate,
    Order,
}

impl CheckKind {
    fn name(self) -> &'static str {
        match self {
            CheckKind::Duality => "duality",
            CheckKind::Convexity => "convexity",
            CheckKind::Rate => "rate",
            CheckKind::Order => "order",
        }
    }
}

#[derive(Args, Debug)]
pub struct Common {
    /// Initial marginal μ (CSV: x1..xd,w).
    #[arg(long)]
    mu: Option<PathBuf>,
    /// Terminal marginal ν.
    #[arg(long)]
    nu: Option<PathBuf>,
    /// Starting point of the descent (defaults to μ).
    #[arg(long)]
    alpha0: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// JSON run configuration (`"version": 1`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// exact | entropic
    #[arg(long)]
    method: Option<String>,
    /// Entropic regularization.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl Common {
    pub fn run_config(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        cfg.apply_overrides(self.seed, self.method.as_deref(), self.epsilon)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mu(&self) -> Result<&Path, Failure> {
        self.mu.as_deref().ok_or_else(|| Failure::invalid("--mu is required".into()))
    }

    pub fn nu(&self) -> Result<&Path, Failure> {
        self.nu.as_deref().ok_or_else(|| Failure::invalid("--nu is required".into()))
    }
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn invalid(msg: String) -> Self {
        Self { code: 1, msg }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: 1, msg: format!("{}: {e}", path.display()) }
    }

    pub fn check(msg: String) -> Self {
        Self { code: 4, msg }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<bassmbb_core::Error> for Failure {
    fn from(e: bassmbb_core::Error) -> Self {
        Self::invalid(e.to_string())
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("BASSMBB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::invalid(format!("BASSMBB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::invalid(e.to_string()))
}

fn run(cli: Cli) -> Result<u8, Failure> {
    init_threads()?;
    match cli.command {
        Command::Solve(c) => commands::solve(&c),
        Command::Simulate(c) => commands::simulate(&c),
        Command::Check { which, common } => checks::run(which, &common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not failures; usage errors map
            // to 1 so they never collide with the solver's exit codes
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("bassmbb: {f}");
            ExitCode::from(f.code)
        }
    }
}
