//! Output files with provenance: CSV with `#` header lines, JSON with a
//! `_meta` object.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL: &str = "muxctl";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the device config bytes.
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
}

impl Meta {
    pub fn new(command: &str, config_sha256: Option<String>, seed: Option<u64>) -> Self {
        Meta {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256,
            seed,
        }
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("tool", self.tool.clone()),
            ("version", self.version.clone()),
            ("command", self.command.clone()),
            ("config_sha256", self.config_sha256.clone().unwrap_or_else(|| "none".into())),
            ("seed", self.seed.map_or_else(|| "none".into(), |s| s.to_string())),
        ]
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// In-memory table: a header row and string cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[k].parse().ok()).collect()
    }
}

/// Shortest round-trip float text.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn csv_string(meta: &Meta, table: &Table) -> String {
    let mut s = String::new();
    for (k, v) in meta.pairs() {
        let _ = writeln!(s, "# {k}: {v}");
    }
    let _ = writeln!(s, "{}", table.columns.join(","));
    for r in &table.rows {
        let _ = writeln!(s, "{}", r.join(","));
    }
    s
}

pub fn write_csv(path: &Path, meta: &Meta, table: &Table) -> Result<(), CliError> {
    write_text(path, &csv_string(meta, table))
}

pub fn parse_csv(text: &str) -> Result<(Vec<(String, String)>, Table), CliError> {
    let mut meta = Vec::new();
    let mut lines = text.lines();
    let header = loop {
        match lines.next() {
            Some(l) if l.starts_with('#') => {
                let (k, v) = l.trim_start_matches('#').split_once(':').unwrap_or((l, ""));
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            Some(l) => break l,
            None => return Err(CliError::Validation("CSV has no header row".into())),
        }
    };
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let cells: Vec<String> = l.split(',').map(str::to_string).collect();
        if cells.len() != columns.len() {
            return Err(CliError::Validation(format!("CSV row {} has {} cells, expected {}", i + 1, cells.len(), columns.len())));
        }
        rows.push(cells);
    }
    Ok((meta, Table { columns, rows }))
}

pub fn read_csv(path: &Path) -> Result<(Vec<(String, String)>, Table), CliError> {
    parse_csv(&read_text(path)?)
}

/// Pretty JSON of `body` (an object) with `_meta` inserted.
pub fn json_string<T: Serialize>(meta: &Meta, body: &T) -> Result<String, CliError> {
    let mut obj = match serde_json::to_value(body).map_err(|e| CliError::Io(e.to_string()))? {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("data".into(), other);
            m
        }
    };
    obj.insert("_meta".into(), serde_json::to_value(meta).expect("plain struct"));
    let mut s = serde_json::to_string_pretty(&Value::Object(obj)).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, meta: &Meta, body: &T) -> Result<(), CliError> {
    write_text(path, &json_string(meta, body)?)
}

/// Splits a tool JSON file into its `_meta` and the remaining object.
pub fn parse_json(text: &str) -> Result<(Meta, Value), CliError> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
    let meta = v
        .as_object_mut()
        .and_then(|o| o.remove("_meta"))
        .ok_or_else(|| CliError::Validation("JSON output without _meta".into()))?;
    let meta = serde_json::from_value(meta).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((meta, v))
}

pub fn read_json(path: &Path) -> Result<(Meta, Value), CliError> {
    parse_json(&read_text(path)?)
}
