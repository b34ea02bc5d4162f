//! Deterministic CSV and JSON result files.
//!
//! Floats are printed with 17 significant digits (`{:.16e}`), enough to
//! round-trip every `f64` bit pattern; JSON objects are emitted with
//! sorted keys.  Given the same configuration and seed, a rerun
//! therefore produces byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

/// Format a float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// In-memory CSV table: a header row naming the columns, a second row
/// giving their units, then data rows.
pub struct CsvTable {
    columns: Vec<String>,
    units: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    /// New table with the given column names and unit labels.
    ///
    /// # Panics
    ///
    /// If the two slices differ in length (a programming error).
    pub fn new(columns: &[&str], units: &[&str]) -> Self {
        assert_eq!(columns.len(), units.len(), "one unit label per column");
        Self {
            columns: columns.iter().map(|s| (*s).to_owned()).collect(),
            units: units.iter().map(|s| (*s).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    /// Append a data row.
    ///
    /// # Panics
    ///
    /// If the row width does not match the header (a programming error).
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// Number of data rows so far.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Write the table as `dir/name`, creating `dir` if needed.
    pub fn write(&self, dir: &Path, name: &str) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let mut text = String::new();
        text.push_str(&self.columns.join(","));
        text.push('\n');
        text.push_str(&self.units.join(","));
        text.push('\n');
        for row in &self.rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Write a JSON value as `dir/name` with a trailing newline.
pub fn write_json(
    dir: &Path,
    name: &str,
    value: &serde_json::Value,
) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).expect("tree of plain values");
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}
