//! Line-delimited records and the aligned text summary.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fields shared by every record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub command: String,
    pub seed: Option<u64>,
    pub parameters: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub kind: String,
    pub body: Map<String, Value>,
}

impl Record {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            body: Map::new(),
        }
    }

    /// Record whose body is the fields of `payload`, in declaration order.
    pub fn from_payload<T: Serialize>(kind: &str, payload: &T) -> Result<Self, CliError> {
        match serde_json::to_value(payload).map_err(|e| CliError::Internal(e.to_string()))? {
            Value::Object(body) => Ok(Self { kind: kind.into(), body }),
            other => Ok(Self::new(kind).with("value", other)),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.body.insert(key.into(), value.into());
        self
    }
}

/// Writes finite floats with 17 significant digits, enough to read back
/// the same bits.
struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// One JSON object: command, version, seed, parameters, record kind, then
/// the body fields.
pub fn render_line(header: &Header, record: &Record) -> String {
    let mut obj = Map::new();
    obj.insert("command".into(), header.command.clone().into());
    obj.insert("version".into(), ARTIFACT_VERSION.into());
    obj.insert("seed".into(), header.seed.map_or(Value::Null, Value::from));
    obj.insert("parameters".into(), Value::Object(header.parameters.clone()));
    obj.insert("record".into(), record.kind.clone().into());
    for (k, v) in &record.body {
        obj.insert(k.clone(), v.clone());
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    Value::Object(obj).serialize(&mut ser).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn render(header: &Header, records: &[Record]) -> String {
    records.iter().map(|r| render_line(header, r) + "\n").collect()
}

/// Rows for the human-readable summary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }
}

/// Short float for summary cells.
pub fn cell(v: f64) -> String {
    format!("{v:.6e}")
}

/// `"<n> records"` followed by the table with padded columns.
pub fn summary(n_records: usize, table: &Table) -> String {
    let mut out = format!("{n_records} records\n");
    if table.rows.is_empty() || table.columns.is_empty() {
        return out;
    }
    let mut width: Vec<usize> = table.columns.iter().map(|c| c.len()).collect();
    for r in &table.rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| -> String {
        let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    out += &line(&table.columns);
    out += &line(&width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for r in &table.rows {
        out += &line(r);
    }
    out
}

/// Writes the data stream to `out` (stdout when absent).
pub fn write_data(out: Option<&Path>, data: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, data).map_err(|e| CliError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(data.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io {
                    path: "<stdout>".into(),
                    message: e.to_string(),
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        let mut parameters = Map::new();
        parameters.insert("alpha".into(), "1".into());
        Header {
            command: "form".into(),
            seed: Some(7),
            parameters,
        }
    }

    #[test]
    fn field_order_and_digits() {
        let r = Record::new("estimate").with("value", 2.0 / 3.0).with("nsamples", 10u64);
        let line = render_line(&header(), &r);
        assert_eq!(
            line,
            r#"{"command":"form","version":"0.1.0","seed":7,"parameters":{"alpha":"1"},"record":"estimate","value":6.6666666666666663e-1,"nsamples":10}"#
        );
    }

    #[test]
    fn floats_read_back_exactly() {
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, 1e308, 123456789.123456789, f64::MIN_POSITIVE];
        let mut r = Record::new("x");
        for (k, v) in vals.iter().enumerate() {
            r = r.with(&format!("v{k}"), *v);
        }
        let back: Value = serde_json::from_str(&render_line(&header(), &r)).unwrap();
        for (k, v) in vals.iter().enumerate() {
            assert_eq!(back[format!("v{k}")].as_f64().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn empty_summary() {
        assert_eq!(render(&header(), &[]), "");
        assert_eq!(summary(0, &Table::new(&["a"])), "0 records\n");
    }

    #[test]
    fn aligned_columns() {
        let mut t = Table::new(&["name", "v"]);
        t.row(vec!["long-name".into(), "1".into()]);
        let s = summary(1, &t);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "1 records");
        assert_eq!(lines[1], "name       v");
        assert_eq!(lines[3], "long-name  1");
    }
}
