//! Run-directory artifacts: CSV tables, schema-versioned summary JSON, the
//! provenance line, and the resolved-config echo.
//!
//! Every CSV number is printed with a configurable number of significant
//! digits (17 by default, enough for bit-exact f64 round trips), and nothing
//! time- or host-dependent is written into CSV files, so identical
//! configurations produce bitwise-identical tables. Wall-clock timing lives
//! only in the summary JSON.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::evolve::HaltInfo;
use crate::phase::Moments;
use crate::shockctl::config::{OutputFormat, RunConfig};
use crate::{Error, Result};

/// Format one number with `sig` significant digits (1..=17) in scientific
/// notation — the CSV number format.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    let digits = sig.clamp(1, 17) - 1;
    format!("{x:.digits$e}")
}

/// Incremental CSV builder with a fixed column layout.
pub struct CsvTable {
    text: String,
    columns: usize,
    precision: usize,
}

impl CsvTable {
    pub fn new(header: &[&str], precision: usize) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            text,
            columns: header.len(),
            precision,
        }
    }

    /// Append one row; `cells` must match the header width.
    pub fn row(&mut self, cells: &[CsvCell<'_>]) {
        assert_eq!(cells.len(), self.columns, "CSV row width mismatch");
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match cell {
                CsvCell::Int(v) => self.text.push_str(&v.to_string()),
                CsvCell::Num(v) => self.text.push_str(&fmt_sig(*v, self.precision)),
                CsvCell::Str(s) => self.text.push_str(s),
            }
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// One CSV cell.
pub enum CsvCell<'a> {
    Int(i64),
    Num(f64),
    Str(&'a str),
}

/// Moments flattened for serialization.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MomentsSummary {
    pub density: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
    pub temperature: f64,
}

impl From<Moments> for MomentsSummary {
    fn from(m: Moments) -> Self {
        Self {
            density: m.density,
            momentum: m.momentum,
            energy: m.energy,
            temperature: m.temperature,
        }
    }
}

/// Halt record flattened for serialization.
#[derive(Clone, Debug, Serialize)]
pub struct HaltSummary {
    pub step: usize,
    pub t: f64,
    pub reason: String,
}

impl From<&HaltInfo> for HaltSummary {
    fn from(h: &HaltInfo) -> Self {
        Self {
            step: h.step,
            t: h.t,
            reason: h.reason.clone(),
        }
    }
}

/// Machine-readable run summary (`summary.json`).
#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub mode: String,
    pub provenance: String,
    pub exit_code: i32,
    pub wall_time_s: f64,
    pub steps_completed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halted: Option<HaltSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_moments: Option<MomentsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_linf_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_identity_gap_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_balance_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_total_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_roots: Option<usize>,
    /// File names written into the run directory.
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn new(mode: &str, provenance: String) -> Self {
        Self {
            schema_version: super::config::SCHEMA_VERSION,
            mode: mode.to_owned(),
            provenance,
            exit_code: 0,
            wall_time_s: 0.0,
            steps_completed: 0,
            halted: None,
            warnings: Vec::new(),
            final_moments: None,
            final_entropy: None,
            max_linf_drift: None,
            max_identity_gap_rel: None,
            max_balance_defect: None,
            final_total_mass: None,
            n_roots: None,
            artifacts: Vec::new(),
        }
    }
}

/// One line identifying what produced a run directory: artifact version,
/// grid, model, collision method, seed. Stable across identical invocations.
pub fn provenance_line(cfg: &RunConfig, mode: &str) -> String {
    format!(
        "coldtail {} mode={} grid=n{}xL{} model=s{}/gamma{}/ks{} collision={} seed={}",
        env!("CARGO_PKG_VERSION"),
        mode,
        cfg.grid.n,
        cfg.grid.l,
        cfg.model.s,
        cfg.model.gamma,
        cfg.model.kernel_scale,
        cfg.collision.method,
        cfg.seed
    )
}

/// A run directory being filled: tracks written artifacts for the summary.
pub struct RunDir {
    root: PathBuf,
    artifacts: Vec<String>,
}

impl RunDir {
    /// Create (or reuse) the run directory and write the resolved-config
    /// echo and provenance line into it.
    pub fn create(root: PathBuf, cfg: &RunConfig, mode: &str) -> Result<Self> {
        std::fs::create_dir_all(&root)?;
        let mut dir = Self {
            root,
            artifacts: Vec::new(),
        };
        dir.write_text("config.resolved.toml", &cfg.to_toml()?)?;
        dir.write_text("provenance.txt", &format!("{}\n", provenance_line(cfg, mode)))?;
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Write a text artifact (relative `name`, may contain one directory
    /// level such as `snapshots/...`).
    pub fn write_text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, content)?;
        self.artifacts.push(name.to_owned());
        Ok(())
    }

    /// Write a CSV artifact when the run emits CSV.
    pub fn write_csv(&mut self, cfg: &RunConfig, name: &str, table: CsvTable) -> Result<()> {
        if cfg.emits(OutputFormat::Csv) {
            self.write_text(name, &table.into_string())?;
        }
        Ok(())
    }

    /// Write a JSON artifact when the run emits JSON (`summary.json` is
    /// always written).
    pub fn write_json<T: Serialize>(
        &mut self,
        cfg: &RunConfig,
        name: &str,
        value: &T,
    ) -> Result<()> {
        if name == "summary.json" || cfg.emits(OutputFormat::Json) {
            let text = serde_json::to_string_pretty(value)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            self.write_text(name, &format!("{text}\n"))?;
        }
        Ok(())
    }

    /// Finish the run: stamp artifacts into the summary and write it.
    pub fn finish(mut self, cfg: &RunConfig, mut summary: Summary) -> Result<PathBuf> {
        self.artifacts.push("summary.json".to_owned());
        summary.artifacts = self.artifacts.clone();
        summary.artifacts.sort();
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let path = self.root.join("summary.json");
        std::fs::write(&path, format!("{text}\n"))?;
        let _ = cfg;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shockctl::config::parse_config;

    #[test]
    fn significant_digit_formatting_round_trips() {
        let x = std::f64::consts::PI * 1e-7;
        let s = fmt_sig(x, 17);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(fmt_sig(1.0, 3), "1.00e0");
        assert_eq!(fmt_sig(-0.015625, 5), "-1.5625e-2");
    }

    #[test]
    fn csv_rows_follow_the_header_width() {
        let mut t = CsvTable::new(&["step", "value"], 5);
        t.row(&[CsvCell::Int(3), CsvCell::Num(0.5)]);
        assert_eq!(t.into_string(), "step,value\n3,5.0000e-1\n");
    }

    #[test]
    fn run_dir_tracks_artifacts_and_writes_the_echo() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = parse_config("[model]\ns = 9.0\n").unwrap();
        let mut dir =
            RunDir::create(tmp.path().join("run"), &cfg, "relax").unwrap();
        let mut table = CsvTable::new(&["a"], 17);
        table.row(&[CsvCell::Num(1.0)]);
        dir.write_csv(&cfg, "moments.csv", table).unwrap();
        let summary = Summary::new("relax", provenance_line(&cfg, "relax"));
        let path = dir.finish(&cfg, summary).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("\"mode\": \"relax\""));
        assert!(text.contains("moments.csv"));
        assert!(text.contains("config.resolved.toml"));
        // The echo reloads to the same configuration.
        let echo =
            std::fs::read_to_string(tmp.path().join("run/config.resolved.toml")).unwrap();
        assert_eq!(parse_config(&echo).unwrap(), cfg);
    }

    #[test]
    fn formats_gate_which_artifacts_are_written() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = parse_config("[output]\nformats = [\"json\"]\n").unwrap();
        let mut dir = RunDir::create(tmp.path().join("run"), &cfg, "relax").unwrap();
        let mut table = CsvTable::new(&["a"], 17);
        table.row(&[CsvCell::Num(1.0)]);
        dir.write_csv(&cfg, "moments.csv", table).unwrap();
        assert!(!tmp.path().join("run/moments.csv").exists());
        let summary = Summary::new("relax", provenance_line(&cfg, "relax"));
        dir.finish(&cfg, summary).unwrap();
        assert!(tmp.path().join("run/summary.json").exists());
    }
}
