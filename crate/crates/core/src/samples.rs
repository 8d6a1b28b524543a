//! Row-major sample matrices and CSV ingestion.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// `n` points in `R^dim`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len() % dim,
            });
        }
        Ok(Samples { dim, data })
    }

    /// One-dimensional samples.
    pub fn from_column(values: Vec<f64>) -> Self {
        Samples {
            dim: 1,
            data: values,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Samples::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows `range`, copied.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Samples {
        Samples {
            dim: self.dim,
            data: self.data[range.start * self.dim..range.end * self.dim].to_vec(),
        }
    }

    /// Rows in the given order.
    pub fn select(&self, order: &[usize]) -> Samples {
        let mut data = Vec::with_capacity(order.len() * self.dim);
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Samples {
            dim: self.dim,
            data,
        }
    }

    /// Concatenate two sample sets of equal dimension.
    pub fn concat(&self, other: &Samples) -> Result<Samples> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Samples {
            dim: self.dim,
            data,
        })
    }

    pub fn map_rows(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Samples {
        let mut data = vec![0.0; self.data.len()];
        for (src, dst) in self.rows().zip(data.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        Samples {
            dim: self.dim,
            data,
        }
    }
}

/// Read samples from a CSV file: one sample per row, optional header.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Samples> {
    let file = std::fs::File::open(path)?;
    read_csv_from(file)
}

/// Same as [`read_csv`] for any reader.
///
/// A first row that does not parse as numbers is treated as a header. Row
/// numbers in errors are 1-based physical lines. NaN and infinities are
/// rejected.
pub fn read_csv_from(reader: impl Read) -> Result<Samples> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut dim = 0usize;
    let mut data = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::Csv {
                    row,
                    message: format!("not a number: {e}"),
                })
            }
        };
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Csv {
                row,
                message: format!("non-finite value in column {}", col + 1),
            });
        }
        if dim == 0 {
            dim = values.len();
        } else if values.len() != dim {
            return Err(Error::Csv {
                row,
                message: format!("expected {dim} columns, found {}", values.len()),
            });
        }
        data.extend(values);
    }
    if dim == 0 {
        return Err(Error::Csv {
            row: 0,
            message: "no numeric rows".into(),
        });
    }
    Samples::new(dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_and_without_header() {
        let s = read_csv_from("x,y\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.len(), 2);
        assert_eq!(s.row(1), &[3.0, 4.0]);
        let s = read_csv_from("0.5\n-1\n".as_bytes()).unwrap();
        assert_eq!(s.as_slice(), &[0.5, -1.0]);
    }

    #[test]
    fn rejects_non_finite_with_row_number() {
        let err = read_csv_from("1\n2\nNaN\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 3, .. }), "{err}");
        let err = read_csv_from("1\ninf\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 2, .. }));
    }

    #[test]
    fn rejects_ragged_and_garbage_rows() {
        assert!(matches!(
            read_csv_from("1,2\n3\n".as_bytes()),
            Err(Error::Csv { row: 2, .. })
        ));
        assert!(matches!(
            read_csv_from("1\nabc\n".as_bytes()),
            Err(Error::Csv { row: 2, .. })
        ));
        assert!(read_csv_from("".as_bytes()).is_err());
    }
}
