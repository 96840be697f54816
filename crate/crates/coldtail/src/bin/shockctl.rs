//! `shockctl` — drive collision-operator verification, homogeneous
//! relaxation, reduced self-similar marching, two-time solves, and the
//! Maxwell-case eigenvalue search from a TOML run configuration.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 verification failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coldtail::shockctl::commands::{
    self, default_run_dir, exit_code_for, CommandOutcome,
};
use coldtail::shockctl::config::{load_config, RunConfig};
use coldtail::shockctl::{Log, LogLevel};

#[derive(Parser, Debug)]
#[command(
    name = "shockctl",
    about = "Boltzmann collision-operator runs: verification, relaxation, \
             self-similar reduction, two-time solves, eigenvalue search",
    version
)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "shockctl.toml")]
    config: PathBuf,

    /// Override the run directory (default: <output.directory>/<mode>).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Worker threads for the collision stage (0 = rayon's default).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Force single-threaded execution (equivalent to --workers 1).
    #[arg(long, global = true)]
    deterministic: bool,

    /// Log verbosity: error, warn, info, or debug.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    mode: Mode,
}

#[derive(Subcommand, Debug)]
enum Mode {
    /// Run the cross-module invariant checks and write verify.json.
    Verify,
    /// Integrate space-homogeneous relaxation toward equilibrium.
    Relax,
    /// March the reduced self-similar tail equation in the ray variable.
    Reduced,
    /// Solve the two-time (lab time x delay) Maxwell system.
    TwoTime,
    /// Scan a lambda bracket for Maxwell-case similarity eigenvalues.
    Eigen,
}

impl Mode {
    fn name(&self) -> &'static str {
        match self {
            Mode::Verify => "verify",
            Mode::Relax => "relax",
            Mode::Reduced => "reduced",
            Mode::TwoTime => "two-time",
            Mode::Eigen => "eigen",
        }
    }
}

fn dispatch(
    mode: &Mode,
    cfg: &RunConfig,
    run_root: PathBuf,
    log: &Log,
) -> coldtail::Result<CommandOutcome> {
    match mode {
        Mode::Verify => commands::cmd_verify(cfg, run_root, log),
        Mode::Relax => commands::cmd_relax(cfg, run_root, log),
        Mode::Reduced => commands::cmd_reduced(cfg, run_root, log),
        Mode::TwoTime => commands::cmd_two_time(cfg, run_root, log),
        Mode::Eigen => commands::cmd_eigen(cfg, run_root, log),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let level: LogLevel = match cli.log_level.parse() {
        Ok(level) => level,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let log = Log::new(level);

    let cfg = match load_config(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            log.error(&format!("cannot load {}: {e}", cli.config.display()));
            return ExitCode::from(exit_code_for(&e) as u8);
        }
    };

    let threads = if cli.deterministic { 1 } else { cli.workers };
    let run_root = cli
        .output_dir
        .clone()
        .unwrap_or_else(|| default_run_dir(&cfg, cli.mode.name()));

    let run = || match dispatch(&cli.mode, &cfg, run_root.clone(), &log) {
        Ok(outcome) => {
            log.info(&format!(
                "{} finished with exit code {}; artifacts in {}",
                cli.mode.name(),
                outcome.exit_code,
                outcome.run_dir.display()
            ));
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            log.error(&format!("{} failed: {e}", cli.mode.name()));
            ExitCode::from(exit_code_for(&e) as u8)
        }
    };

    if threads > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log.error(&format!("cannot build a {threads}-thread pool: {e}"));
                ExitCode::from(3)
            }
        }
    } else {
        run()
    }
}
