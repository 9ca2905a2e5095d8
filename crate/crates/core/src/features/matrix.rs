use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    column_names: Vec<String>,
    data: Vec<f64>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn new(column_names: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let n_cols = column_names.len();
        let mut seen = HashSet::with_capacity(n_cols);
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate column name `{name}`")));
            }
        }
        let n_rows = if n_cols == 0 {
            if !data.is_empty() {
                return Err(Error::InvalidInput("data given for a matrix without columns".into()));
            }
            0
        } else {
            if data.len() % n_cols != 0 {
                return Err(Error::InvalidInput(format!(
                    "{} cells do not fill rows of {n_cols} columns",
                    data.len()
                )));
            }
            data.len() / n_cols
        };
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                column: column_names[pos % n_cols].clone(),
                row: pos / n_cols,
            });
        }
        Ok(FeatureMatrix { column_names, data, n_rows })
    }

    pub fn from_rows(column_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = column_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::InvalidInput(format!(
                "row {bad} has {} cells, expected {n_cols}",
                rows[bad].len()
            )));
        }
        Self::new(column_names, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols().max(1)).take(self.n_rows)
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            column_names: self.column_names.clone(),
            data,
            n_rows: idx.len(),
        }
    }

    /// Writes a header of column names followed by one line per row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.column_names)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let names: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let mut data = Vec::new();
        for (line, rec) in r.records().enumerate() {
            for cell in rec?.iter() {
                data.push(cell.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("feature row {}: `{cell}` is not a number", line + 1))
                })?);
            }
        }
        Self::new(names, data)
    }
}
