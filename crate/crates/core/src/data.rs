//! Observational datasets: named columns over an `n_samples × n_vars` matrix.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row} has {found} fields, header has {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: `{cell}` is not a number")]
    NonNumeric {
        row: usize,
        column: String,
        cell: String,
    },
    #[error("non-finite value in column `{0}`")]
    NonFinite(String),
    #[error("dataset needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    values: DMatrix<f64>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, values: DMatrix<f64>) -> Result<Self, DataError> {
        if columns.len() != values.ncols() {
            return Err(DataError::Shape(format!(
                "{} names for {} columns",
                columns.len(),
                values.ncols()
            )));
        }
        if values.nrows() < 2 {
            return Err(DataError::TooFewSamples(values.nrows()));
        }
        let mut seen = HashSet::new();
        let columns: Vec<String> = columns.into_iter().map(|c| c.trim().to_string()).collect();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(DataError::DuplicateColumn(c.clone()));
            }
        }
        for (j, c) in columns.iter().enumerate() {
            if values.column(j).iter().any(|v| !v.is_finite()) {
                return Err(DataError::NonFinite(c.clone()));
            }
        }
        Ok(Self { columns, values })
    }

    /// Builds from row-major samples.
    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let d = columns.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(DataError::Ragged {
                    row: i + 1,
                    expected: d,
                    found: r.len(),
                });
            }
        }
        let values = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(columns, values)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, DataError> {
        let key = name.trim();
        self.columns
            .iter()
            .position(|c| c == key)
            .ok_or_else(|| DataError::UnknownColumn(key.to_string()))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Rows `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, DataError> {
        let values = DMatrix::from_fn(rows.len(), self.n_vars(), |i, j| self.values[(rows[i], j)]);
        Self::new(self.columns.clone(), values)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != columns.len() {
                return Err(DataError::Ragged {
                    row: i + 1,
                    expected: columns.len(),
                    found: rec.len(),
                });
            }
            let mut row = Vec::with_capacity(columns.len());
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                    row: i + 1,
                    column: columns[j].clone(),
                    cell: cell.to_string(),
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        Self::from_rows(columns, &rows)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// CSV text: header row, then one row per sample. Values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
        wtr.write_record(&self.columns).expect("in-memory write");
        for i in 0..self.n_samples() {
            let row: Vec<String> = (0..self.n_vars())
                .map(|j| format!("{}", self.values[(i, j)]))
                .collect();
            wtr.write_record(&row).expect("in-memory write");
        }
        let bytes = wtr.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
