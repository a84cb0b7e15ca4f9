//! Training data: a dense row-major feature matrix with a response column.

use std::collections::HashSet;
use std::io::Read;

use crate::error::{Error, Result};

/// `n` observations of `p` covariates plus a response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    response: Vec<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from rows, validating shape, finiteness and names.
    pub fn new(rows: Vec<Vec<f64>>, response: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        let p = column_names.len();
        if p == 0 {
            return Err(Error::input("dataset needs at least one feature column"));
        }
        if rows.len() != response.len() {
            return Err(Error::input(format!(
                "{} feature rows but {} responses",
                rows.len(),
                response.len()
            )));
        }
        if rows.len() < 2 {
            return Err(Error::input(format!("need at least 2 rows, got {}", rows.len())));
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::input(format!("duplicate column name `{name}`")));
            }
        }
        let mut features = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::input(format!("row {i} has {} values, expected {p}", row.len())));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::input(format!("non-finite value in row {i}, column `{}`", column_names[j])));
            }
            features.extend_from_slice(row);
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite response in row {i}")));
        }
        Ok(Self { features, response, column_names })
    }

    /// Convenience constructor naming the columns `x0, x1, ...`.
    pub fn from_rows(rows: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        Self::new(rows, response, (0..p).map(|j| format!("x{j}")).collect())
    }

    /// Reads a headed, comma-separated table; `target` names the response column
    /// and every other column becomes a feature. Empty cells are rejected.
    pub fn from_csv<R: Read>(reader: R, target: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::input(format!("cannot read csv header: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let target_idx = headers
            .iter()
            .position(|h| h == target)
            .ok_or_else(|| Error::input(format!("target column `{target}` not found in header")))?;
        let names: Vec<String> =
            headers.iter().enumerate().filter(|(k, _)| *k != target_idx).map(|(_, h)| h.clone()).collect();

        let mut rows = Vec::new();
        let mut response = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::input(format!("malformed csv record {}: {e}", line + 1)))?;
            let mut row = Vec::with_capacity(names.len());
            for (k, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                let column = &headers[k];
                if cell.is_empty() {
                    return Err(Error::input(format!("empty cell in record {}, column `{column}`", line + 1)));
                }
                let value: f64 = cell.parse().map_err(|_| {
                    Error::input(format!("non-numeric value `{cell}` in record {}, column `{column}`", line + 1))
                })?;
                if k == target_idx {
                    response.push(value);
                } else {
                    row.push(value);
                }
            }
            rows.push(row);
        }
        Self::new(rows, response, names)
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.features[i * p..(i + 1) * p]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_features() + j]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Copy with feature column `j` passed through `f`.
    pub fn map_feature(&self, j: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let rows = (0..self.n_rows())
            .map(|i| {
                let mut r = self.row(i).to_vec();
                r[j] = f(r[j]);
                r
            })
            .collect();
        Self::new(rows, self.response.clone(), self.column_names.clone())
    }

    /// Copy with the response replaced.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Self> {
        if response.len() != self.n_rows() {
            return Err(Error::input("replacement response has the wrong length"));
        }
        if response.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("replacement response contains non-finite values"));
        }
        Ok(Self { features: self.features.clone(), response, column_names: self.column_names.clone() })
    }
}
