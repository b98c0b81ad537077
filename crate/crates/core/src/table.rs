//! Deterministic tabular output.

use std::fmt::Write as _;

use crate::error::{OqwError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Csv,
    /// Whitespace-aligned columns.
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // 17 significant digits, enough to round-trip any f64
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(OqwError::DimensionMismatch {
                context: "table row".into(),
                expected: self.header.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, format: TableFormat) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::render).collect())
            .collect();
        let mut out = String::new();
        match format {
            TableFormat::Csv => {
                out.push_str(&self.header.join(","));
                out.push('\n');
                for row in &cells {
                    out.push_str(&row.join(","));
                    out.push('\n');
                }
            }
            TableFormat::Text => {
                let mut widths: Vec<usize> = self.header.iter().map(String::len).collect();
                for row in &cells {
                    for (w, c) in widths.iter_mut().zip(row) {
                        *w = (*w).max(c.len());
                    }
                }
                let line = |out: &mut String, row: &[String]| {
                    let parts: Vec<String> = row
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:>w$}"))
                        .collect();
                    let _ = writeln!(out, "{}", parts.join("  "));
                };
                line(&mut out, &self.header);
                for row in &cells {
                    line(&mut out, row);
                }
            }
        }
        out
    }
}

/// Renders a table and writes it to `path`, or returns the text when no
/// path is given.
pub fn emit_table(
    table: &Table,
    format: TableFormat,
    path: Option<&std::path::Path>,
) -> std::io::Result<String> {
    let text = table.render(format);
    if let Some(path) = path {
        std::fs::write(path, &text)?;
    }
    Ok(text)
}
