//! Plumbing for the `shockctl` command-line driver.
//!
//! The binary is a thin argument parser; everything testable lives here:
//!
//! * [`config`] — the TOML run-configuration schema, defaulting, and
//!   cross-field validation ([`config::RunConfig`]).
//! * [`report`] — run directories, deterministic CSV/JSON artifact writers,
//!   and the `summary.json` schema.
//! * [`commands`] — the five run modes (`verify`, `relax`, `reduced`,
//!   `two-time`, `eigen`) as library functions returning
//!   [`commands::CommandOutcome`].
//!
//! All numeric artifacts are bitwise-reproducible for a fixed configuration:
//! nothing time- or host-dependent is written to CSV files (wall time appears
//! only in `summary.json`).

pub mod commands;
pub mod config;
pub mod report;

pub use config::{parse_config, RunConfig, SCHEMA_VERSION};
pub use commands::{exit_code_for, CommandOutcome};

/// Verbosity threshold for the stderr logger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl std::str::FromStr for LogLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "error" => Ok(LogLevel::Error),
            "warn" | "warning" => Ok(LogLevel::Warn),
            "info" => Ok(LogLevel::Info),
            "debug" => Ok(LogLevel::Debug),
            other => Err(format!(
                "unknown log level '{other}' (expected error, warn, info, or debug)"
            )),
        }
    }
}

/// Minimal stderr logger; artifacts stay deterministic because logs never
/// land in run directories.
#[derive(Clone, Copy, Debug)]
pub struct Log {
    level: LogLevel,
}

impl Log {
    pub fn new(level: LogLevel) -> Self {
        Self { level }
    }

    /// A logger that only reports errors (used by tests).
    pub fn quiet() -> Self {
        Self::new(LogLevel::Error)
    }

    pub fn error(&self, msg: &str) {
        eprintln!("error: {msg}");
    }

    pub fn warn(&self, msg: &str) {
        if self.level >= LogLevel::Warn {
            eprintln!("warn: {msg}");
        }
    }

    pub fn info(&self, msg: &str) {
        if self.level >= LogLevel::Info {
            eprintln!("info: {msg}");
        }
    }

    pub fn debug(&self, msg: &str) {
        if self.level >= LogLevel::Debug {
            eprintln!("debug: {msg}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_levels_parse_case_insensitively() {
        assert_eq!("INFO".parse::<LogLevel>().unwrap(), LogLevel::Info);
        assert_eq!("warning".parse::<LogLevel>().unwrap(), LogLevel::Warn);
        assert!("verbose".parse::<LogLevel>().is_err());
    }

    #[test]
    fn log_levels_order_by_verbosity() {
        assert!(LogLevel::Debug > LogLevel::Info);
        assert!(LogLevel::Info > LogLevel::Warn);
        assert!(LogLevel::Warn > LogLevel::Error);
    }
}
