//! CSV tables and JSON sidecars. Every file carries the tool version and the
//! digest of the effective configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Flag(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

fn render(cell: &Cell, out: &mut String) {
    // 17 significant digits: enough to round-trip any f64.
    let _ = match cell {
        Cell::Num(v) => write!(out, "{v:.16e}"),
        Cell::Int(v) => write!(out, "{v}"),
        Cell::Text(s) => write!(out, "{s}"),
        Cell::Flag(b) => write!(out, "{b}"),
    };
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, digest: &str) -> String {
        let mut s = format!("# qfeedback {VERSION} config_sha256={digest}\n");
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                render(cell, &mut s);
            }
            s.push('\n');
        }
        s
    }
}

/// Output location `<prefix>_<name>.<ext>`.
pub fn path_for(prefix: &Path, name: &str, ext: &str) -> PathBuf {
    let stem = prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let file = if stem.is_empty() {
        format!("{name}.{ext}")
    } else {
        format!("{stem}_{name}.{ext}")
    };
    prefix.with_file_name(file)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// Writes `<prefix>_<name>.csv` and the `.json` sidecar; returns both paths.
pub fn emit(
    prefix: &Path,
    name: &str,
    cfg: &RunConfig,
    table: &Table,
    extra: Value,
) -> Result<Vec<PathBuf>, CliError> {
    let digest = cfg.digest();
    let csv = path_for(prefix, name, "csv");
    write(&csv, &table.to_csv(&digest))?;
    let sidecar = json!({
        "tool": "qfeedback",
        "version": VERSION,
        "command": name,
        "config_sha256": digest,
        "config": cfg,
        "csv": csv.file_name().map(|f| f.to_string_lossy().into_owned()),
        "results": extra,
    });
    let json_path = path_for(prefix, name, "json");
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::Config(e.to_string()))?;
    write(&json_path, &text)?;
    Ok(vec![csv, json_path])
}

/// Extra CSV without a sidecar, e.g. per-jump records.
pub fn emit_csv(prefix: &Path, name: &str, cfg: &RunConfig, table: &Table) -> Result<PathBuf, CliError> {
    let path = path_for(prefix, name, "csv");
    write(&path, &table.to_csv(&cfg.digest()))?;
    Ok(path)
}
