use std::io::{self, Write};
use std::path::{Path, PathBuf};

use cbond_core::format::{csv_num, json_num};
use serde_json::{json, Map, Value};

use crate::args::{Format, OutArgs};

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => csv_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json_num(*x),
            Cell::Int(n) => json!(n),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let mut m = Map::new();
                    for (c, v) in self.columns.iter().zip(row) {
                        m.insert(c.clone(), v.json());
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }
}

/// What a command produces: a table plus the echoed configuration and notes.
/// `json` replaces the table in JSON output when the result has more
/// structure than rows.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub notes: Vec<String>,
    pub table: Table,
    pub json: Option<Value>,
}

impl Report {
    pub fn new(command: &'static str, config: Value, table: Table) -> Self {
        Report {
            command,
            config,
            notes: Vec::new(),
            table,
            json: None,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = format!("# cbond {}\n# config: {}\n", self.command, self.config);
                for n in &self.notes {
                    out.push_str(&format!("# {n}\n"));
                }
                out.push_str(&self.table.columns.join(","));
                out.push('\n');
                for row in &self.table.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let doc = json!({
                    "command": self.command,
                    "config": self.config,
                    "notes": self.notes,
                    "result": self.json.clone().unwrap_or_else(|| self.table.to_json()),
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
                s.push('\n');
                s
            }
        }
    }
}

pub enum Target {
    Stdout(Format),
    File(PathBuf, Format),
}

pub fn target(out: &OutArgs) -> Target {
    match (out.out.as_str(), out.format) {
        ("csv", f) => Target::Stdout(f.unwrap_or(Format::Csv)),
        ("json", f) => Target::Stdout(f.unwrap_or(Format::Json)),
        ("-", f) => Target::Stdout(f.unwrap_or(Format::Csv)),
        (path, f) => {
            let path = PathBuf::from(path);
            let fmt = f.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
                Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
                _ => Format::Csv,
            });
            Target::File(path, fmt)
        }
    }
}

/// Writes next to the target and renames into place, so the target path
/// never holds a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn emit(report: &Report, out: &OutArgs) -> io::Result<()> {
    match target(out) {
        Target::Stdout(f) => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(report.render(f).as_bytes())?;
            lock.flush()
        }
        Target::File(path, f) => write_atomic(&path, &report.render(f)),
    }
}
