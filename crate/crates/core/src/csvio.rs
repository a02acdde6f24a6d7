//! Plain CSV tables with `# key=value` metadata lines.
//!
//! Floats are written with 17 significant digits so identical inputs give
//! byte-identical files.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            meta: Vec::new(),
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Table::default();
        let mut have_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    table.meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if !have_header {
                table.header = line.split(',').map(|s| s.trim().to_string()).collect();
                have_header = true;
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if row.len() != table.header.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    table.header.len(),
                    row.len()
                )));
            }
            table.rows.push(row);
        }
        if !have_header {
            return Err(Error::Parse("missing header line".into()));
        }
        Ok(table)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_back_what_we_write() {
        let mut t = Table::new(&["t", "re", "im"]).with_meta("units", "ps");
        t.push(vec![0.0, 1.0, -0.1]);
        t.push(vec![0.5, 1.0 / 3.0, 2e-300]);
        let back = Table::parse(&t.to_csv_string()).unwrap();
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.meta_value("units"), Some("ps"));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Table::parse("a,b\n1,2\n3\n").is_err());
    }
}
