//! Tables and records written by the command-line front end.

use std::fmt::Write as _;

use serde::Serialize;

/// Fixed 17-significant-digit scientific notation, independent of locale.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV table whose rows all end in a `units` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    units: String,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str], units: &str) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), units: units.to_string(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{},units", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{},{}", row.join(","), self.units);
        }
        out
    }
}

/// Error record emitted in place of the regular output.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub status: &'static str,
    pub error_kind: &'static str,
    pub message: String,
}

impl ErrorRecord {
    pub fn new(err: &crate::error::Error) -> Self {
        Self { status: "error", error_kind: err.kind(), message: err.to_string() }
    }

    pub fn to_csv(&self) -> String {
        let message = self.message.replace('"', "\"\"");
        format!("status,error_kind,message,units\n{},{},\"{}\",none\n", self.status, self.error_kind, message)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("error record serializes") + "\n"
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}
