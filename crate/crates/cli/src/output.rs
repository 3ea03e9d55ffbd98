//! CSV and JSON emission. Every artifact carries the tool version and the
//! resolved configuration: a `#` header line for CSV, `tool`/`version`/`config`
//! fields for JSON. JSON rows use the CSV column names as keys.

use std::io::Write;

use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::Failure;

pub const TOOL: &str = "foelner-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Value>>,
    /// Extra top-level JSON fields (CSV output leaves them to stderr).
    pub extra: Map<String, Value>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Table { columns, rows: Vec::new(), extra: Map::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// f64 cell; non-finite values become empty cells.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn render(table: &Table, config: &RunConfig, format: Format) -> Result<Vec<u8>, Failure> {
    let config_json = serde_json::to_value(config).map_err(|e| Failure::internal(e.to_string()))?;
    match format {
        Format::Csv => {
            let mut out = Vec::new();
            writeln!(out, "# {TOOL} {VERSION} config={}", serde_json::to_string(&config_json).expect("serializable"))
                .expect("write to memory");
            let mut w = csv::Writer::from_writer(out);
            w.write_record(table.columns).map_err(|e| Failure::internal(e.to_string()))?;
            for row in &table.rows {
                w.write_record(row.iter().map(cell_text)).map_err(|e| Failure::internal(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Failure::internal(e.to_string()))
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| Value::Object(table.columns.iter().map(|c| c.to_string()).zip(row.iter().cloned()).collect()))
                .collect();
            let mut doc = Map::new();
            doc.insert("tool".into(), Value::String(TOOL.into()));
            doc.insert("version".into(), Value::String(VERSION.into()));
            doc.insert("config".into(), config_json);
            doc.insert("rows".into(), Value::Array(rows));
            for (k, v) in &table.extra {
                doc.insert(k.clone(), v.clone());
            }
            let mut out = serde_json::to_vec_pretty(&Value::Object(doc)).map_err(|e| Failure::internal(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

pub fn emit(bytes: &[u8], config: &RunConfig) -> Result<(), Failure> {
    match &config.output {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Failure::validation(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::internal(format!("cannot write to stdout: {e}"))),
    }
}
