//! Deterministic writers. Floats use the shortest representation that
//! parses back to the same value.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::failure::{CliResult, Failure};

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(Failure::io(root))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> CliResult<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Failure::Config(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(Failure::io(&path))
    }

    pub fn text(&self, name: &str, body: &str) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, body).map_err(Failure::io(&path))
    }

    pub fn csv(&self, name: &str, table: &Table) -> CliResult<()> {
        let path = self.path(name);
        let to_io = |e: csv::Error| Failure::Io {
            path: path.clone(),
            source: e.into(),
        };
        let mut w = csv::Writer::from_path(&path).map_err(to_io)?;
        w.write_record(&table.header).map_err(to_io)?;
        for row in &table.rows {
            w.write_record(row).map_err(to_io)?;
        }
        w.flush().map_err(Failure::io(&path))
    }
}

/// Rows of pre-formatted cells under a fixed header.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Splits a comma-separated header.
    pub fn with_header(header: &str) -> Self {
        Self::new(&header.split(',').collect::<Vec<_>>())
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_floats(&mut self, prefix: Vec<String>, values: &[f64]) {
        let mut row = prefix;
        row.extend(values.iter().map(|&v| float(v)));
        self.push(row);
    }
}

pub fn float(v: f64) -> String {
    format!("{v:?}")
}
