//! CSV tables (17 significant digits, LF line endings) and the versioned JSON
//! summary document.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::SCHEMA_VERSION;
use crate::error::{CliError, CliResult};

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_floats(&mut self, values: &[f64]) {
        self.push(values.iter().map(|&x| fmt_float(x)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| CliError::io(path, e))?;
        w.write_record(&self.header).map_err(|e| CliError::io(path, e))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| CliError::io(path, e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn table(&mut self, name: &str, table: &Table) -> CliResult<()> {
        let path = self.root.join(name);
        table.write(&path)?;
        self.written.push(path);
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.root.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn summary(&mut self, command: &str, metadata: Value, results: Value) -> CliResult<()> {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "metadata": metadata,
            "results": results,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("summary serializes");
        text.push('\n');
        self.text("summary.json", &text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Complex number as `{"re": .., "im": ..}`.
pub fn complex(z: floquet_spectra::C64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

pub fn complex_matrix(m: &floquet_spectra::CMatrix) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| complex(m[(i, j)])).collect())).collect())
}

/// Column names `{prefix}{i}{j}_re`, `{prefix}{i}{j}_im`, 1-based, row-major.
pub fn complex_columns(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * rows * cols);
    for i in 1..=rows {
        for j in 1..=cols {
            out.push(format!("{prefix}{i}{j}_re"));
            out.push(format!("{prefix}{i}{j}_im"));
        }
    }
    out
}

pub fn flatten_complex(m: &floquet_spectra::CMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}
