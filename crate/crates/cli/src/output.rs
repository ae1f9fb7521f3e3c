use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::VERSION;
use crate::error::{CliError, Result};

/// An output directory whose artifacts are all stamped with the config hash
/// and toolkit version.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub hash: String,
}

impl Artifacts {
    pub fn create(dir: &Path, hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Artifacts { dir: dir.to_path_buf(), hash: hash.to_string() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn stamp(&self, value: Value) -> Value {
        let mut out = Map::new();
        out.insert("config_hash".into(), Value::String(self.hash.clone()));
        out.insert("version".into(), Value::String(VERSION.into()));
        match value {
            Value::Object(obj) => out.extend(obj),
            other => {
                out.insert("data".into(), other);
            }
        }
        Value::Object(out)
    }

    pub fn write_json(&self, name: &str, value: Value) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(&self.stamp(value))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Stamps a JSON document produced elsewhere (e.g. by the core serializers).
    pub fn write_json_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        self.write_json(name, serde_json::from_str(text)?)
    }

    pub fn write_csv(&self, name: &str, table: &Table) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, table.render(&self.hash)).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Appends one row, writing the header first if the file is new.
    pub fn append_csv_row(&self, name: &str, header: &[&str], row: &[String]) -> Result<()> {
        let path = self.path(name);
        let fresh = !path.exists();
        let mut f = fs::OpenOptions::new().create(true).append(true).open(&path).map_err(|e| CliError::io(&path, e))?;
        let mut text = String::new();
        if fresh {
            text.push_str(&header_line(header));
        }
        text.push_str(&row_line(row, &self.hash));
        f.write_all(text.as_bytes()).map_err(|e| CliError::io(&path, e))
    }
}

/// Rows of preformatted cells. `config_hash` and `version` columns are
/// appended on render.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, hash: &str) -> String {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        let mut out = header_line(&header);
        for row in &self.rows {
            out.push_str(&row_line(row, hash));
        }
        out
    }
}

fn header_line(header: &[&str]) -> String {
    let mut cols = header.to_vec();
    cols.extend(["config_hash", "version"]);
    cols.join(",") + "\n"
}

fn row_line(row: &[String], hash: &str) -> String {
    let mut cols = row.to_vec();
    cols.push(hash.to_string());
    cols.push(VERSION.to_string());
    cols.join(",") + "\n"
}

/// Shortest round-trip scientific form; NaN is written as an empty cell.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

/// Reads a CSV written by [`Artifacts`], returning the header and rows with
/// the stamp columns still attached.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}
