//! Command output and its three renderings.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Plain,
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn as_objects(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect(),
        )
    }
}

/// Scalar and nested fields, plus an optional table. In JSON the table goes
/// under `rows` unless the command already placed its data in `meta`.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub meta: Map<String, Value>,
    pub table: Option<Table>,
    pub table_in_json: bool,
    /// Suite violation or failed experiment: exit status 2.
    pub violation: bool,
}

impl Report {
    pub fn new() -> Report {
        Report { table_in_json: true, ..Default::default() }
    }

    pub fn set(&mut self, key: &str, v: impl Serialize) {
        self.meta.insert(key.to_string(), to_value(v));
    }

    pub fn with_table(mut self, t: Table) -> Report {
        self.table = Some(t);
        self
    }

    pub fn render(&self, command: &str, seed: u64, format: Format, out: &mut dyn Write) -> io::Result<()> {
        match format {
            Format::Json => {
                let mut result = self.meta.clone();
                if let (Some(t), true) = (&self.table, self.table_in_json) {
                    result.insert("rows".into(), t.as_objects());
                }
                let mut env = Map::new();
                env.insert("command".into(), Value::from(command));
                env.insert("seed".into(), Value::from(seed));
                env.insert("result".into(), Value::Object(result));
                serde_json::to_writer_pretty(&mut *out, &Value::Object(env))?;
                writeln!(out)
            }
            Format::Plain => {
                writeln!(out, "command: {command}")?;
                writeln!(out, "seed: {seed}")?;
                for (k, v) in &self.meta {
                    // row data is already in the table
                    if self.table.is_some() && v.is_array() {
                        continue;
                    }
                    writeln!(out, "{k}: {}", plain(v))?;
                }
                if let Some(t) = &self.table {
                    writeln!(out)?;
                    writeln!(out, "{}", t.columns.join("\t"))?;
                    for r in &t.rows {
                        let cells: Vec<String> = r.iter().map(plain).collect();
                        writeln!(out, "{}", cells.join("\t"))?;
                    }
                }
                Ok(())
            }
            Format::Csv => {
                // a comment line keeps the seed with plot-ready data
                writeln!(out, "# command = {command}, seed = {seed}")?;
                match &self.table {
                    Some(t) => {
                        writeln!(out, "{}", t.columns.join(","))?;
                        for r in &t.rows {
                            let cells: Vec<String> = r.iter().map(csv_cell).collect();
                            writeln!(out, "{}", cells.join(","))?;
                        }
                    }
                    None => {
                        writeln!(out, "key,value")?;
                        for (k, v) in &self.meta {
                            writeln!(out, "{k},{}", csv_cell(v))?;
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

pub fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn is_estimate(v: &Value) -> bool {
    v.as_object().is_some_and(|o| o.len() == 2 && o.contains_key("mean") && o.contains_key("se"))
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "NaN".into(),
        v if is_estimate(v) => format!("{} ± {}", v["mean"], v["se"]),
        other => other.to_string(),
    }
}

fn csv_cell(v: &Value) -> String {
    let s = plain(v);
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}
