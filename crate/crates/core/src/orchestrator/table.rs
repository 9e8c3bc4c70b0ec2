//! Typed result tables and their CSV form.
//!
//! A file starts with `# key: value` metadata lines, one of which
//! (`# types:`) records the column types so that parsing restores every cell
//! exactly. Floats are written with 17 significant digits.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Cell::Num(a), Cell::Num(b)) => a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
            (Cell::Int(a), Cell::Int(b)) => a == b,
            (Cell::Text(a), Cell::Text(b)) => a == b,
            _ => false,
        }
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn kind(&self) -> ColumnType {
        match self {
            Cell::Num(_) => ColumnType::Num,
            Cell::Int(_) => ColumnType::Int,
            Cell::Text(_) => ColumnType::Text,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
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

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Int(b as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Num,
    Int,
    Text,
}

impl ColumnType {
    fn name(self) -> &'static str {
        match self {
            ColumnType::Num => "num",
            ColumnType::Int => "int",
            ColumnType::Text => "text",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "num" => Ok(ColumnType::Num),
            "int" => Ok(ColumnType::Int),
            "text" => Ok(ColumnType::Text),
            _ => Err(Error::Config(format!("unknown column type '{s}'"))),
        }
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub types: Vec<ColumnType>,
    pub rows: Vec<Vec<Cell>>,
    /// Ordered `(key, value)` pairs written as comment lines.
    pub meta: Vec<(String, String)>,
}

impl Table {
    pub fn new(columns: &[(&str, ColumnType)]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.0.to_string()).collect(),
            types: columns.iter().map(|c| c.1).collect(),
            rows: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::validation(format!(
                "row has {} cells for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        for (cell, (ty, name)) in row.iter().zip(self.types.iter().zip(&self.columns)) {
            if cell.kind() != *ty {
                return Err(Error::validation(format!("column '{name}' expects {}", ty.name())));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Numeric view of one column; text cells become NaN.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| Error::Config(format!("table has no column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[c].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}")?;
        }
        let types: Vec<&str> = self.types.iter().map(|t| t.name()).collect();
        writeln!(out, "# types: {}", types.join(","))?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        // writing into memory cannot fail
        let _ = self.write_csv(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string().as_bytes())
    }

    pub fn parse<R: BufRead>(input: R) -> Result<Self> {
        let mut meta = Vec::new();
        let mut types = None;
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            if body.is_empty() {
                if let Some(rest) = line.strip_prefix("# ") {
                    let (k, v) = rest.split_once(": ").unwrap_or((rest, ""));
                    if k == "types" {
                        types = Some(v.split(',').map(ColumnType::parse).collect::<Result<Vec<_>>>()?);
                    } else {
                        meta.push((k.to_string(), v.to_string()));
                    }
                    continue;
                }
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let columns: Vec<String> = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
        let types = types.unwrap_or_else(|| vec![ColumnType::Text; columns.len()]);
        if types.len() != columns.len() {
            return Err(Error::Config(format!("{} types for {} columns", types.len(), columns.len())));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_error)?;
            let row = rec
                .iter()
                .zip(&types)
                .map(|(s, t)| parse_cell(s, *t))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Table { columns, types, rows, meta })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(f))
    }
}

fn parse_cell(s: &str, t: ColumnType) -> Result<Cell> {
    let bad = || Error::Config(format!("cannot parse '{s}' as {}", t.name()));
    Ok(match t {
        ColumnType::Num => Cell::Num(match s {
            "NaN" => f64::NAN,
            "inf" => f64::INFINITY,
            "-inf" => f64::NEG_INFINITY,
            _ => s.parse().map_err(|_| bad())?,
        }),
        ColumnType::Int => Cell::Int(s.parse().map_err(|_| bad())?),
        ColumnType::Text => Cell::Text(s.to_string()),
    })
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Config(format!("{other:?}")),
        }
    } else {
        Error::Config(format!("malformed CSV: {e}"))
    }
}

/// Write through a temporary sibling and rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
