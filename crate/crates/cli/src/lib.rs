//! Output plumbing for the `hyperlab` binary: versioned CSV tables with a
//! `#` metadata header, JSON reports, and the exit-code contract.

use std::fmt;
use std::io::Write;

use hyperlab::QuadConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Usage = 2,
    Io = 3,
    Inconclusive = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Usage,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Io,
            message: message.into(),
        }
    }

    pub fn inconclusive(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Inconclusive,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<hyperlab::Error> for CliError {
    fn from(e: hyperlab::Error) -> Self {
        match e {
            hyperlab::Error::Accuracy { .. } => CliError::inconclusive(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::io(e.to_string())
    }
}

/// The resolved configuration of one run, embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub args: Value,
    pub quad: QuadConfig,
    pub threads: Option<usize>,
    pub version: String,
}

/// Name, version and columns of a CSV table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub name: String,
    pub version: u32,
    pub columns: Vec<String>,
}

impl Schema {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Schema {
            name: name.to_string(),
            version: SCHEMA_VERSION,
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn tag(&self) -> String {
        format!("{}/v{}", self.name, self.version)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // 17 significant digits round-trip every f64
            Cell::Float(v) => write!(f, "{v:.16e}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::Float(v) if v.is_finite() => Value::from(*v),
            Cell::Float(v) => Value::from(v.to_string()),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.clone()),
        }
    }
}

/// Writes `rows` as CSV after the metadata lines
/// `# schema: <name>/v<version>`, `# config: <json>` and any `extra` lines.
pub fn write_csv<W: Write>(
    out: W,
    schema: &Schema,
    config: &RunConfig,
    extra: &[(String, Value)],
    rows: &[Vec<Cell>],
) -> Result<(), CliError> {
    let mut out = out;
    writeln!(out, "# schema: {}", schema.tag())?;
    writeln!(
        out,
        "# config: {}",
        serde_json::to_string(config).map_err(|e| CliError::io(e.to_string()))?
    )?;
    for (k, v) in extra {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&schema.columns)?;
    for row in rows {
        if row.len() != schema.columns.len() {
            return Err(CliError::io(format!(
                "row with {} fields for {} columns",
                row.len(),
                schema.columns.len()
            )));
        }
        w.write_record(row.iter().map(|c| c.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a table as JSON: `{schema, config, meta, columns, rows}`.
pub fn write_table_json<W: Write>(
    out: W,
    schema: &Schema,
    config: &RunConfig,
    extra: &[(String, Value)],
    rows: &[Vec<Cell>],
) -> Result<(), CliError> {
    let meta: serde_json::Map<String, Value> = extra.iter().cloned().collect();
    let body = serde_json::json!({
        "schema": schema.tag(),
        "config": config,
        "meta": meta,
        "columns": schema.columns,
        "rows": rows.iter().map(|r| r.iter().map(Cell::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    write_json(out, &body)
}

/// Writes a report: `{schema, config, report}`.
pub fn write_report<W: Write>(out: W, schema: &str, config: &RunConfig, report: Value) -> Result<(), CliError> {
    let body = serde_json::json!({
        "schema": format!("{schema}/v{SCHEMA_VERSION}"),
        "config": config,
        "report": report,
    });
    write_json(out, &body)
}

fn write_json<W: Write>(mut out: W, body: &Value) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, body).map_err(|e| CliError::io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

/// A CSV table read back with its metadata.
#[derive(Debug, Clone)]
pub struct Table {
    pub config: RunConfig,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parses column `name` as floats.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let i = self.column(name).ok_or_else(|| CliError::usage(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| r[i].parse::<f64>().map_err(|e| CliError::usage(format!("{name}: {e}"))))
            .collect()
    }
}

/// Reads a table written by [`write_csv`]; a different schema tag or column
/// list is an error.
pub fn read_csv(text: &str, expected: &Schema) -> Result<Table, CliError> {
    let mut meta = Vec::new();
    let mut body_start = 0;
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else { break };
        body_start += line.len() + 1;
        let (k, v) = rest
            .trim()
            .split_once(':')
            .ok_or_else(|| CliError::usage(format!("malformed metadata line {line:?}")))?;
        meta.push((k.trim().to_string(), v.trim().to_string()));
    }
    let get = |k: &str| meta.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
    match get("schema") {
        Some(tag) if tag == expected.tag() => {}
        other => {
            return Err(CliError::usage(format!(
                "schema mismatch: expected {}, found {}",
                expected.tag(),
                other.unwrap_or("none")
            )))
        }
    }
    let config: RunConfig = serde_json::from_str(get("config").ok_or_else(|| CliError::usage("missing config metadata"))?)
        .map_err(|e| CliError::usage(format!("config metadata: {e}")))?;
    let mut r = csv::Reader::from_reader(&text.as_bytes()[body_start.min(text.len())..]);
    let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if columns != expected.columns {
        return Err(CliError::usage(format!(
            "schema {} expects columns {:?}, found {:?}",
            expected.tag(),
            expected.columns,
            columns
        )));
    }
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()?;
    Ok(Table {
        config,
        meta,
        columns,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> RunConfig {
        RunConfig {
            command: "conv".into(),
            args: serde_json::json!({"d": 1}),
            quad: QuadConfig::default(),
            threads: None,
            version: "0".into(),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let schema = Schema::new("hyperlab.test", &["x", "label", "n"]);
        let xs = [0.1, std::f64::consts::PI, 1e-300, -2.5e17, f64::MIN_POSITIVE];
        let rows: Vec<Vec<Cell>> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| vec![Cell::Float(*x), Cell::Text(format!("r{i}")), Cell::Int(i as i64)])
            .collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &schema, &config(), &[("note".into(), Value::from(3))], &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let t = read_csv(&text, &schema).unwrap();
        assert_eq!(t.config, config());
        assert_eq!(t.floats("x").unwrap(), xs.to_vec());
        assert_eq!(t.meta.iter().find(|m| m.0 == "note").unwrap().1, "3");
    }

    #[test]
    fn schema_mismatch_fails() {
        let schema = Schema::new("hyperlab.test", &["x"]);
        let mut buf = Vec::new();
        write_csv(&mut buf, &schema, &config(), &[], &[vec![Cell::Float(1.0)]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let renamed = Schema::new("hyperlab.other", &["x"]);
        let recolumned = Schema::new("hyperlab.test", &["y"]);
        let mut bumped = schema.clone();
        bumped.version = 2;
        for s in [renamed, recolumned, bumped] {
            assert_eq!(read_csv(&text, &s).unwrap_err().exit, Exit::Usage);
        }
        assert!(read_csv("x\n1\n", &schema).is_err());
    }

    #[test]
    fn error_mapping() {
        let acc: CliError = hyperlab::Error::Accuracy { estimate: 1.0, error: 1.0 }.into();
        assert_eq!(acc.exit, Exit::Inconclusive);
        let dom: CliError = hyperlab::Error::Unsupported("x".into()).into();
        assert_eq!(dom.exit, Exit::Usage);
        let io: CliError = std::io::Error::other("disk").into();
        assert_eq!(io.exit, Exit::Io);
    }
}
