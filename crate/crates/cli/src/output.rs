//! CSV tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;

/// A named table of optional numbers; `None` is written as an empty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str], rows: Vec<Vec<Option<f64>>>) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows,
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// Index of a header column.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// UTF-8 CSV with a header row. Numbers use the shortest representation
    /// that parses back to the same value.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(
                row.iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            )?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub config: &'a RunConfig,
    pub seed: u64,
    pub version: &'static str,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

/// Writes every table and `manifest.json` into `dir`; returns the paths.
pub fn write_run(dir: &Path, tables: &[Table], manifest: &Manifest<'_>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for t in tables {
        let path = dir.join(t.file_name());
        fs::write(&path, t.to_csv()?)?;
        paths.push(path);
    }
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(manifest)? + "\n")?;
    paths.push(path);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let t = Table::new(
            "x",
            &["a", "b"],
            vec![vec![Some(0.1), None], vec![Some(-2.0), Some(1e-20)]],
        );
        assert_eq!(
            String::from_utf8(t.to_csv().unwrap()).unwrap(),
            "a,b\n0.1,\n-2,0.00000000000000000001\n"
        );
        assert_eq!(t.column_index("b"), Some(1));
    }
}
