//! Artifact writing: fixed-format tables, the resolved-config echo, plot
//! descriptions, and the `run.json` manifest.
//!
//! Numeric CSV content is byte-reproducible: every float is rendered as
//! `{:.16e}` (17 significant digits, `.` decimal separator) and lines end in
//! `\n`. JSON tables carry the same numbers in shortest-round-trip form.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(CliError::Config(format!(
                "unknown output format {other:?} (use \"csv\" or \"json\")"
            ))),
        }
    }
}

/// A purely numeric table; the writer owns all formatting.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Accumulates artifacts in one output directory and finishes with a
/// manifest that checksums every file it wrote.
pub struct ArtifactWriter {
    dir: PathBuf,
    format: OutputFormat,
    records: Vec<Value>,
    started: Instant,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, format: OutputFormat) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Compute(format!("cannot create {}: {e}", dir.display())))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            format,
            records: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))?;
        let digest = Sha256::digest(bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.records.push(json!({
            "file": name,
            "sha256": hex,
            "bytes": bytes.len(),
        }));
        Ok(())
    }

    /// Write a table as `<stem>.csv` or `<stem>.json` according to the run's
    /// format. Returns the file name actually written (for plot references).
    pub fn write_table(&mut self, stem: &str, table: &Table) -> Result<String, CliError> {
        match self.format {
            OutputFormat::Csv => {
                let name = format!("{stem}.csv");
                let mut text = table.columns.join(",");
                text.push('\n');
                for row in &table.rows {
                    let line: Vec<String> = row.iter().map(|&x| fmt_float(x)).collect();
                    text.push_str(&line.join(","));
                    text.push('\n');
                }
                self.write_bytes(&name, text.as_bytes())?;
                Ok(name)
            }
            OutputFormat::Json => {
                let name = format!("{stem}.json");
                let value = json!({
                    "columns": table.columns,
                    "rows": table.rows,
                });
                self.write_json(&name, &value)?;
                Ok(name)
            }
        }
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Compute(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write_bytes(name, text.as_bytes())
    }

    /// Write a declarative description of how to plot the run's tables;
    /// rendering is left to any external plotter.
    pub fn write_plots(&mut self, plots: Vec<Value>) -> Result<(), CliError> {
        self.write_json("plot.json", &Value::Array(plots))
    }

    /// Write `run.json` last, covering every artifact written so far.
    pub fn finish(
        self,
        command: &str,
        seed: u64,
        threads: usize,
        config_echo: Value,
        summary: Value,
    ) -> Result<(), CliError> {
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "threads": threads,
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
            "config": config_echo,
            "artifacts": Value::Array(self.records.clone()),
            "summary": summary,
        });
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Compute(format!("cannot serialize run.json: {e}")))?;
        text.push('\n');
        let path = self.dir.join("run.json");
        std::fs::write(&path, text)
            .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

/// One line-plot description for `plot.json`.
pub fn line_plot(file: &str, title: &str, x: &str, ys: &[&str], log_y: bool) -> Value {
    json!({
        "kind": "line",
        "file": file,
        "title": title,
        "x": x,
        "y": ys,
        "y_scale": if log_y { "log" } else { "linear" },
    })
}

/// One scatter-plot description for `plot.json`.
pub fn scatter_plot(file: &str, title: &str, x: &str, y: &str) -> Value {
    json!({
        "kind": "scatter",
        "file": file,
        "title": title,
        "x": x,
        "y": [y],
        "y_scale": "linear",
    })
}

/// One histogram description for `plot.json`.
pub fn histogram_plot(file: &str, title: &str, column: &str) -> Value {
    json!({
        "kind": "histogram",
        "file": file,
        "title": title,
        "column": column,
    })
}
