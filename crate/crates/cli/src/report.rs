//! Machine-readable reports. Every table is written as CSV with a header or
//! as a JSON array of objects with the same keys.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Rows of one report, each a string-keyed record in column order.
#[derive(Debug, Default)]
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn insert(&mut self, index: usize, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.insert(index, row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(cell))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .map(|c| c.to_string())
                    .zip(row.iter().cloned())
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut out = serde_json::to_string_pretty(&rows).expect("plain values");
        out.push('\n');
        out
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<(), CliError> {
        fs::write(path, self.render(format)).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// A float cell; non-finite values become strings, since JSON has no
/// infinities.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(x.to_string()), Value::Number)
}

pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

pub fn json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain values")
}
