//! CSV emission and ingestion, hashing and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;

/// Shortest text that reads back to the same f64, in plain notation for
/// moderate magnitudes and exponent notation otherwise.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if (1e-4..1e9).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// A CSV table with a `# key: value` header block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { header: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.header.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Numeric data read back from a CSV file, with the file line of each row.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericTable {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub lines: Vec<usize>,
}

impl NumericTable {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }
}

fn malformed(name: &str, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{name}:{line}: {msg}"))
}

/// Parses a numeric CSV. Errors carry the 1-based line number.
pub fn parse_numeric(name: &str, text: &str) -> Result<NumericTable, CliError> {
    let mut header = Vec::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if columns.is_none() {
                if let Some((k, v)) = comment.split_once(':') {
                    header.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        match &columns {
            None => columns = Some(fields.iter().map(|f| f.to_string()).collect()),
            Some(cols) => {
                if fields.len() != cols.len() {
                    return Err(malformed(name, line, format!("expected {} fields, found {}", cols.len(), fields.len())));
                }
                let mut row = Vec::with_capacity(fields.len());
                for (f, col) in fields.iter().zip(cols) {
                    let v: f64 = f.parse().map_err(|_| malformed(name, line, format!("`{f}` in column {col} is not a number")))?;
                    if !v.is_finite() {
                        return Err(malformed(name, line, format!("non-finite value in column {col}")));
                    }
                    row.push(v);
                }
                rows.push(row);
                lines.push(line);
            }
        }
    }
    let columns = columns.ok_or_else(|| CliError::Validation(format!("{name}: no column header line")))?;
    Ok(NumericTable { header, columns, rows, lines })
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

/// Provenance record written next to every run's outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: Option<String>,
    pub input_sha256: Option<String>,
    pub seed: Option<u64>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub files: Vec<FileEntry>,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

/// Writes fully rendered files in order, then the manifest listing them.
pub fn write_outputs(
    dir: &Path,
    files: &[(String, String)],
    manifest_name: &str,
    mut manifest: RunManifest,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| io_error(&path, e))?;
        manifest.files.push(FileEntry { name: name.clone(), sha256: sha256_hex(content.as_bytes()) });
        written.push(path);
    }
    manifest.finished_unix_s = now_unix();
    let path = dir.join(manifest_name);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| io_error(&path, e))?;
    written.push(path);
    Ok(written)
}
