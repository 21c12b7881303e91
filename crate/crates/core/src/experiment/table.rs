//! Result tables: tab-separated text with a `#`-prefixed metadata header,
//! mirrored as a JSON document.
//!
//! ```text
//! # command: free-energy
//! # config_hash: 3f2a...
//! # seed: 0
//! # version: 0.1.0
//! # <note>: <value>
//! beta<TAB>pn_mean<TAB>pn_stderr
//! 0.0<TAB>0.0<TAB>0.0
//! ```
//!
//! Floats are written in Rust's shortest round-trip form (always with a
//! decimal point or exponent), integers without one, so parsing recovers
//! every cell exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Num(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format!("{x:?}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn parse(token: &str) -> Self {
        if let Ok(i) = token.parse::<i64>() {
            return Cell::Int(i);
        }
        match token.parse::<f64>() {
            Ok(x) => Cell::Num(x),
            Err(_) => Cell::Text(token.to_string()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<i64> for Cell {
    fn from(i: i64) -> Self {
        Cell::Int(i)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Int(b as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// Metadata written into every table header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    /// Further `key: value` lines (summary statistics, verdicts).
    pub notes: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub meta: TableMeta,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

fn clean(text: &str) -> bool {
    !text.contains(['\t', '\n', '\r'])
}

impl ResultTable {
    pub fn new(meta: TableMeta, columns: &[&str]) -> Self {
        Self {
            meta,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<(), ExperimentError> {
        if row.len() != self.columns.len() {
            return Err(ExperimentError::Table(format!(
                "row has {} cells for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if let Some(Cell::Text(t)) = row.iter().find(|c| matches!(c, Cell::Text(t) if !clean(t))) {
            return Err(ExperimentError::Table(format!("cell `{t}` contains a tab or newline")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.meta.notes.push((key.to_string(), value.to_string()));
    }

    pub fn note_value(&self, key: &str) -> Option<&str> {
        self.meta.notes.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Values of a numeric column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[j].as_f64()).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let m = &self.meta;
        let _ = writeln!(out, "# command: {}", m.command);
        let _ = writeln!(out, "# config_hash: {}", m.config_hash);
        let _ = writeln!(out, "# seed: {}", m.seed);
        let _ = writeln!(out, "# version: {}", m.version);
        for (k, v) in &m.notes {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.columns.join("\t"));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self, ExperimentError> {
        let bad = |msg: &str| ExperimentError::Table(msg.to_string());
        let mut header = Vec::new();
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.peek() {
            let Some(rest) = line.strip_prefix("# ") else { break };
            let (k, v) = rest.split_once(": ").ok_or_else(|| bad("malformed metadata line"))?;
            header.push((k.to_string(), v.to_string()));
            lines.next();
        }
        let take = |key: &str| -> Result<String, ExperimentError> {
            header
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| bad(&format!("missing `{key}` metadata")))
        };
        let meta = TableMeta {
            command: take("command")?,
            config_hash: take("config_hash")?,
            seed: take("seed")?.parse().map_err(|_| bad("bad seed"))?,
            version: take("version")?,
            notes: header
                .iter()
                .filter(|(k, _)| !["command", "config_hash", "seed", "version"].contains(&k.as_str()))
                .cloned()
                .collect(),
        };
        let columns: Vec<&str> = lines.next().ok_or_else(|| bad("missing column line"))?.split('\t').collect();
        let mut table = Self::new(meta, &columns);
        for line in lines {
            table.push_row(line.split('\t').map(Cell::parse).collect())?;
        }
        Ok(table)
    }

    /// The JSON result document: the table plus run-specific fields
    /// (`wall_time_seconds`, `workers`) that stay out of the TSV.
    pub fn to_json(&self, wall_time_seconds: f64, workers: usize) -> String {
        let doc = serde_json::json!({
            "command": self.meta.command,
            "config_hash": self.meta.config_hash,
            "seed": self.meta.seed,
            "version": self.meta.version,
            "notes": self.meta.notes.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect::<serde_json::Map<_, _>>(),
            "wall_time_seconds": wall_time_seconds,
            "workers": workers,
            "columns": self.columns,
            "rows": self.rows,
        });
        serde_json::to_string_pretty(&doc).expect("table serialises") + "\n"
    }
}
