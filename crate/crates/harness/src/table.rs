//! In-memory result tables and their CSV form.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so parsing
//! an emitted file yields the same table bit for bit.

use std::fmt;
use std::path::Path;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn num(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            _ => None,
        }
    }

    /// Parses a raw field: blank is `Empty`, anything `f64` accepts is `Num`.
    pub fn parse(field: &str) -> Cell {
        if field.is_empty() {
            Cell::Empty
        } else if let Ok(x) = field.parse::<f64>() {
            Cell::Num(x)
        } else {
            Cell::Text(field.to_string())
        }
    }
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

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Empty => Ok(()),
            Cell::Num(x) => write!(f, "{x}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(HarnessError::Table(format!(
                "row has {} cells, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&Cell> {
        self.column(name).and_then(|c| self.rows.get(row).map(|r| &r[c]))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |e: csv::Error| HarnessError::Table(e.to_string());
        w.write_record(&self.header).map_err(wrap)?;
        for row in &self.rows {
            w.write_record(row.iter().map(ToString::to_string)).map_err(wrap)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Table(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| HarnessError::Table(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let wrap = |e: csv::Error| HarnessError::Table(e.to_string());
        let mut table = Table::new(r.headers().map_err(wrap)?.iter());
        for rec in r.records() {
            let rec = rec.map_err(wrap)?;
            table.push(rec.iter().map(Cell::parse).collect())?;
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Table::from_csv(&text).map_err(|e| match e {
            HarnessError::Table(m) => HarnessError::Table(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
