//! In-memory artifacts, written together at the end of a run.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Output format for tabular artifacts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Int(usize),
    Num(f64),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => quote(s),
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => format_num(*v),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Text(s) => serde_json::Value::from(s.as_str()),
            Cell::Int(i) => serde_json::Value::from(*i),
            Cell::Num(v) => serde_json::Value::from(*v),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

/// 17 significant digits, enough to recover every f64 exactly.
pub fn format_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Header `first,t1,...,tk` followed by `label,v1,...,vk` rows.
    pub fn wide<'a>(first: &str, times: &[f64], rows: impl IntoIterator<Item = (String, &'a [f64])>) -> Self {
        let mut header = vec![first.to_string()];
        header.extend(times.iter().map(|t| format_num(*t)));
        let mut table = Self::new(header);
        for (label, vals) in rows {
            let mut row = vec![Cell::Text(label)];
            row.extend(vals.iter().map(|v| Cell::Num(*v)));
            table.push(row);
        }
        table
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.header.iter().map(|h| quote(h)).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| serde_json::Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        serde_json::json!({ "columns": self.header, "rows": rows })
    }
}

#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn table(&mut self, stem: &str, table: &Table, format: Format) {
        match format {
            Format::Csv => self.add(format!("{stem}.csv"), table.to_csv().into_bytes()),
            Format::Json => self.json(&format!("{stem}.json"), &table.to_json()),
        }
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.add(name.to_string(), text.into_bytes());
    }

    pub fn add(&mut self, name: String, bytes: Vec<u8>) {
        self.files.push((name, bytes));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_slice())
    }

    pub fn write_all(&self, dir: &Path) -> Result<()> {
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
