//! Dense row-major feature matrix with explicit missing entries.

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("row has {found} values but the matrix has {expected} columns")]
    WidthMismatch { expected: usize, found: usize },
    #[error("cannot parse `{value}` at row {row}, column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: usize,
    /// `rows × names.len()` values; `None` marks a missing entry.
    pub data: Vec<Option<f64>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>) -> Self {
        FeatureMatrix {
            names,
            rows: 0,
            data: Vec::new(),
        }
    }

    /// Matrix without column names, for numeric work.
    pub fn from_rows(cols: usize, rows: &[Vec<Option<f64>>]) -> Result<Self, MatrixError> {
        let names = (0..cols).map(|j| format!("f{j}")).collect();
        let mut m = FeatureMatrix::new(names);
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    pub fn from_dense(cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len() % cols.max(1), 0);
        FeatureMatrix {
            names: (0..cols).map(|j| format!("f{j}")).collect(),
            rows: if cols == 0 { 0 } else { values.len() / cols },
            data: values.iter().map(|&v| Some(v)).collect(),
        }
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn push_row(&mut self, row: &[Option<f64>]) -> Result<(), MatrixError> {
        if row.len() != self.cols() {
            return Err(MatrixError::WidthMismatch {
                expected: self.cols(),
                found: row.len(),
            });
        }
        self.data
            .extend(row.iter().map(|v| v.filter(|x| x.is_finite())));
        self.rows += 1;
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[Option<f64>] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.data[i * self.cols() + j]
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::new(self.names.clone());
        out.data.reserve(idx.len() * self.cols());
        for &i in idx {
            out.data.extend_from_slice(self.row(i));
        }
        out.rows = idx.len();
        out
    }

    /// Column-wise concatenation; `self` columns first.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix, MatrixError> {
        if self.rows != other.rows {
            return Err(MatrixError::WidthMismatch {
                expected: self.rows,
                found: other.rows,
            });
        }
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        let mut out = FeatureMatrix::new(names);
        for i in 0..self.rows {
            out.data.extend_from_slice(self.row(i));
            out.data.extend_from_slice(other.row(i));
        }
        out.rows = self.rows;
        Ok(out)
    }

    /// Comma-separated with a header of column names; missing values are empty fields.
    pub fn write_csv<W: Write>(&self, out: W, extra: Option<(&str, &[String])>) -> Result<(), MatrixError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        if let Some((name, _)) = extra {
            header.push(name);
        }
        w.write_record(&header)?;
        for i in 0..self.rows {
            let mut rec: Vec<String> = self
                .row(i)
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
                .collect();
            if let Some((_, values)) = extra {
                rec.push(values[i].clone());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv); a trailing column named `extra`
    /// is split off and returned verbatim.
    pub fn read_csv<R: Read>(
        input: R,
        extra: Option<&str>,
    ) -> Result<(FeatureMatrix, Vec<String>), MatrixError> {
        let mut r = csv::Reader::from_reader(input);
        let mut names: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let has_extra = extra.is_some_and(|e| names.last().map(String::as_str) == Some(e));
        if has_extra {
            names.pop();
        }
        let mut m = FeatureMatrix::new(names);
        let mut extras = Vec::new();
        let mut row = Vec::with_capacity(m.cols());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            row.clear();
            for (j, field) in rec.iter().take(m.cols()).enumerate() {
                let field = field.trim();
                row.push(if field.is_empty() {
                    None
                } else {
                    Some(field.parse::<f64>().map_err(|_| MatrixError::Parse {
                        row: i + 1,
                        column: m.names[j].clone(),
                        value: field.to_owned(),
                    })?)
                });
            }
            if has_extra {
                extras.push(rec.get(m.cols()).unwrap_or("").to_owned());
            }
            m.push_row(&row)?;
        }
        Ok((m, extras))
    }
}
