//! Tab-separated tables with a header row.
//!
//! Missing numeric values are written as `NA` and read back as NaN.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::fmt_sig6;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    lookup: HashMap<String, usize>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        let lookup = columns.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Self {
            columns,
            rows: Vec::new(),
            lookup,
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.lookup.contains_key(name)
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::invalid(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.lookup
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("table has no column `{name}`")))
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// Parses a column as numbers; `NA`, empty and `nan` cells become NaN.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| parse_number(&row[i]).ok_or_else(|| {
                Error::invalid(format!("column `{name}` row {}: `{}` is not a number", r + 1, row[i]))
            }))
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').from_path(path)?;
        let mut table = Table::new(rdr.headers()?.iter().map(String::from));
        for rec in rdr.records() {
            let rec = rec?;
            table
                .push(rec.iter().map(String::from).collect())
                .map_err(|e| Error::parse(path, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }
}

pub fn parse_number(cell: &str) -> Option<f64> {
    let c = cell.trim();
    if c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    match c {
        "true" => Some(1.0),
        "false" => Some(0.0),
        _ => c.parse().ok(),
    }
}

pub fn num(x: f64) -> String {
    fmt_sig6(x)
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_sig6)
}
