//! Deterministic CSV tables and `key = value` reports.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{invalid, Error, Result};

/// Column-oriented table: a leading key column (usually time) followed by
/// one column per series.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    /// Column headers, key column first.
    pub headers: Vec<String>,
    /// Columns of equal length, in header order.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    /// Table with only the key column.
    pub fn new(key: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            headers: vec![key.into()],
            columns: vec![values],
        }
    }

    /// Appends a series.
    pub fn push(&mut self, header: impl Into<String>, values: Vec<f64>) -> &mut Self {
        self.headers.push(header.into());
        self.columns.push(values);
        self
    }

    /// Number of data rows.
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Checks that the table is rectangular.
    pub fn validate(&self) -> Result<()> {
        if self.headers.len() != self.columns.len() {
            return invalid("table has a different number of headers and columns");
        }
        let n = self.rows();
        if self.columns.iter().any(|c| c.len() != n) {
            return invalid("table columns differ in length");
        }
        if self.headers.iter().any(|h| h.contains([',', '\n', '\r', '"'])) {
            return invalid("table headers may not contain commas, quotes or line breaks");
        }
        Ok(())
    }

    /// CSV text: header row, then values in `{:.16e}` (17 significant
    /// digits, exact round trip), comma separated with LF line endings.
    pub fn to_csv(&self) -> Result<String> {
        self.validate()?;
        let mut s = String::with_capacity(24 * self.rows() * self.columns.len().max(1) + 64);
        s.push_str(&self.headers.join(","));
        s.push('\n');
        for r in 0..self.rows() {
            for (c, col) in self.columns.iter().enumerate() {
                if c > 0 {
                    s.push(',');
                }
                write!(s, "{:.16e}", col[r]).expect("write to string");
            }
            s.push('\n');
        }
        Ok(s)
    }
}

/// Writes `table` to `path` as CSV.
pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let text = table.to_csv()?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Ordered `key = value` report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    /// Entries in insertion order.
    pub entries: Vec<(String, String)>,
}

impl Report {
    /// Appends an entry.
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// Appends a float in round-trip notation.
    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.push(key, format!("{value:.16e}"))
    }

    /// First value stored under `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Parses the value stored under `key` as a float.
    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    /// Report text, one `key = value` line per entry.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            writeln!(s, "{k} = {v}").expect("write to string");
        }
        s
    }

    /// Writes the report to `path`.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Parses report text back into entries.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { entries }
    }
}
