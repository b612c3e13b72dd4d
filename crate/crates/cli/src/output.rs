//! Flat tables rendered as JSON lines or CSV with the same fields.

use std::fmt::Write as _;

use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone)]
pub enum Field {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

impl Field {
    fn to_json(&self) -> Value {
        match self {
            // JSON has no infinities; they are written as strings.
            Field::Num(x) => Number::from_f64(round12(*x)).map_or_else(|| Value::String(x.to_string()), Value::Number),
            Field::Int(n) => Value::Number((*n).into()),
            Field::Bool(b) => Value::Bool(*b),
            Field::Text(s) => Value::String(s.clone()),
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Field::Num(_) => self.to_json().to_string().trim_matches('"').to_string(),
            Field::Int(n) => n.to_string(),
            Field::Bool(b) => b.to_string(),
            Field::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Field::Text(s) => s.clone(),
        }
    }
}

pub type Row = Vec<(&'static str, Field)>;

/// Rows sharing one set of columns.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub rows: Vec<Row>,
}

impl Table {
    pub fn single(row: Row) -> Self {
        Self { rows: vec![row] }
    }
}

pub fn render(tables: &[Table], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Json => {
            for row in tables.iter().flat_map(|t| &t.rows) {
                let obj: Map<String, Value> = row.iter().map(|(k, v)| ((*k).to_string(), v.to_json())).collect();
                let _ = writeln!(out, "{}", Value::Object(obj));
            }
        }
        Format::Csv => {
            for (i, table) in tables.iter().enumerate() {
                let Some(first) = table.rows.first() else { continue };
                if i > 0 {
                    out.push('\n');
                }
                let header: Vec<&str> = first.iter().map(|(k, _)| *k).collect();
                let _ = writeln!(out, "{}", header.join(","));
                for row in &table.rows {
                    let cells: Vec<String> = row.iter().map(|(_, v)| v.to_csv()).collect();
                    let _ = writeln!(out, "{}", cells.join(","));
                }
            }
        }
    }
    out
}
