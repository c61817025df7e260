//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::analyze::{analyze, Mode};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::norms::norms;
use crate::oracle_check::oracle_check;
use crate::run::{run, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "mfsim", version, about = "Monitored long-range free-fermion simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the config value, then to every core.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; defaults to the config value, then to `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep (L, α, γ) cells and write ensemble estimates.
    Run {
        #[command(flatten)]
        common: Common,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop after this many new trajectories (simulated interruption).
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Boundary-Hamiltonian norms against system size, with fits.
    Norms {
        #[command(flatten)]
        common: Common,
    },
    /// Crossing, collapse or CFT analysis of result files.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Observable to analyse; overrides the config.
        #[arg(long)]
        observable: Option<String>,
        /// results.csv and optionally trajectories.csv files.
        files: Vec<PathBuf>,
    },
    /// Compare the Gaussian engine with the dense reference on small rings.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Corrupt the measurement update; the check must then fail.
        #[arg(long, hide = true)]
        corrupt_update: bool,
    },
}

fn load(common: &Common, required: bool) -> Result<ExperimentConfig, CliError> {
    match &common.config {
        Some(path) => ExperimentConfig::load(path),
        None if required => Err(CliError::Config("--config is required".into())),
        None => ExperimentConfig::from_toml("seed = 0\n"),
    }
}

fn out_dir(common: &Common, config: &ExperimentConfig) -> PathBuf {
    common.out.clone().or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn workers(common: &Common, config: &ExperimentConfig) -> Result<usize, CliError> {
    let n = common
        .workers
        .or(config.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    Ok(n)
}

fn with_pool<T>(n: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Run { common, resume, stop_after } => {
            let config = load(&common, true)?;
            let opts = RunOptions { out: out_dir(&common, &config), workers: workers(&common, &config)?, resume, stop_after };
            let report = run(&config, &opts)?;
            Ok(format!(
                "run {}: {} cells, {} trajectories computed, {} reused; results in {}",
                report.config_hash,
                report.cells,
                report.computed,
                report.reused,
                opts.out.display()
            ))
        }
        Command::Norms { common } => {
            let config = load(&common, false)?;
            let out = out_dir(&common, &config);
            let report = with_pool(workers(&common, &config)?, || norms(&config, &out))??;
            let lines: Vec<String> = report
                .series
                .iter()
                .map(|s| format!("alpha {}: {:?}", s.alpha, s.classification))
                .collect();
            Ok(lines.join("\n"))
        }
        Command::Analyze { common, mode, observable, files } => {
            let mut config = load(&common, false)?;
            if let Some(o) = observable {
                config.analysis.observable = o;
            }
            let out = out_dir(&common, &config);
            let report = with_pool(workers(&common, &config)?, || analyze(&files, mode, &config.analysis, config.seed, &out))??;
            Ok(serde_json::to_string_pretty(&report)?)
        }
        Command::OracleCheck { common, corrupt_update } => {
            let config = load(&common, false)?;
            let out = out_dir(&common, &config);
            let report = with_pool(workers(&common, &config)?, || oracle_check(&config, &out, corrupt_update))??;
            let mut lines: Vec<String> = report
                .checks
                .iter()
                .map(|c| {
                    format!(
                        "{} L={} alpha={} {}: max deviation {:.3e} (tolerance {:.0e}) {}",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.sites,
                        c.alpha,
                        c.name,
                        c.max_deviation,
                        c.tolerance,
                        c.detail
                    )
                })
                .collect();
            if report.passed {
                Ok(lines.join("\n"))
            } else {
                lines.push("oracle check failed".into());
                Err(CliError::Check(lines.join("\n")))
            }
        }
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mfsim: {e}");
            e.exit_code()
        }
    }
}
