//! Numeric CSV tables: a header row followed by one row of doubles per
//! sample.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use symfield_core::Matrix;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub data: Matrix,
}

/// Shortest decimal that parses back to the same double. Very large or very
/// small magnitudes switch to exponent notation to keep rows short.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v.is_finite() && a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

impl Table {
    pub fn new(columns: Vec<String>, data: Matrix) -> Result<Self> {
        if columns.len() != data.cols() {
            return Err(CliError::invalid(format!(
                "{} column names for {} data columns",
                columns.len(),
                data.cols()
            )));
        }
        Ok(Self { columns, data })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
        let columns: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if columns.is_empty() {
            return Err(CliError::invalid(format!("{}: no header row", path.display())));
        }
        let mut values = Vec::new();
        let mut rows = 0;
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(csv_err)?;
            for (c, field) in record.iter().enumerate() {
                let v = parse_f64(field).ok_or_else(|| {
                    CliError::invalid(format!(
                        "{}: row {}, column `{}`: `{field}` is not a number",
                        path.display(),
                        r + 1,
                        columns[c]
                    ))
                })?;
                values.push(v);
            }
            rows += 1;
        }
        Ok(Self { data: Matrix::from_vec(rows, columns.len(), values), columns })
    }

    pub fn write_to<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(&self.columns)?;
        for i in 0..self.data.rows() {
            writer.write_record(self.data.row(i).iter().map(|v| format_f64(*v)))?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Writes to `path`, or to standard output when `path` is `None`.
    pub fn write(&self, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => {
                let file = File::create(p).map_err(|source| CliError::Io { path: p.to_path_buf(), source })?;
                self.write_to(io::BufWriter::new(file)).map_err(|source| CliError::Csv { path: p.to_path_buf(), source })
            }
            None => self.write_to(io::stdout().lock()).map_err(|source| CliError::Csv { path: "<stdout>".into(), source }),
        }
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::invalid(format!("no column named `{name}` (have {})", self.columns.join(", "))))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.data.column(self.index_of(name)?))
    }

    /// The named columns, in the order given.
    pub fn select(&self, names: &[String]) -> Result<Matrix> {
        let idx = names.iter().map(|n| self.index_of(n)).collect::<Result<Vec<_>>>()?;
        Ok(self.data.select_columns(&idx))
    }

    /// Every column except `excluded` (which need not exist).
    pub fn names_except(&self, excluded: &[&str]) -> Vec<String> {
        self.columns.iter().filter(|c| !excluded.contains(&c.as_str())).cloned().collect()
    }
}
