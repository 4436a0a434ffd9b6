//! Entity-by-feature data matrices, range standardization and CSV I/O.
//!
//! Values are stored row-major: entity `i` occupies
//! `values[i * n_features .. (i + 1) * n_features]`.

use std::borrow::Cow;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ClusterError, Result};

/// Name of the optional trailing ground-truth column in CSV files.
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    values: Vec<f64>,
    n_entities: usize,
    n_features: usize,
    standardized: bool,
}

impl DataMatrix {
    /// Builds a raw (unstandardized) matrix from row-major values.
    pub fn new(n_entities: usize, n_features: usize, values: Vec<f64>) -> Result<Self> {
        if n_entities < 2 {
            return Err(ClusterError::InvalidData(format!(
                "need at least 2 entities, got {n_entities}"
            )));
        }
        if n_features < 1 {
            return Err(ClusterError::InvalidData("need at least 1 feature".into()));
        }
        if values.len() != n_entities * n_features {
            return Err(ClusterError::DimensionMismatch {
                expected: n_entities * n_features,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(ClusterError::NonFinite {
                row: pos / n_features,
                column: pos % n_features,
            });
        }
        Ok(Self {
            values,
            n_entities,
            n_features,
            standardized: false,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_features = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_features {
                return Err(ClusterError::DimensionMismatch {
                    expected: n_features,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), n_features, values)
    }

    /// Wraps values that are already standardized (e.g. a re-scaled view of
    /// standardized data). The caller vouches for the flag.
    pub fn new_standardized(n_entities: usize, n_features: usize, values: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(n_entities, n_features, values)?;
        m.standardized = true;
        Ok(m)
    }

    #[inline]
    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let v = self.n_features;
        &self.values[i * v..(i + 1) * v]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Returns a copy holding only the first `n` features.
    pub fn leading_features(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_features {
            return Err(ClusterError::InvalidConfig(format!(
                "cannot keep {n} of {} features",
                self.n_features
            )));
        }
        let values = self.rows().flat_map(|r| r[..n].iter().copied()).collect();
        let mut m = Self::new(self.n_entities, n, values)?;
        m.standardized = self.standardized;
        Ok(m)
    }
}

/// Per-feature range standardization: `(y - mean) / (max - min)`.
///
/// Constant features become all zeros and are reported through `log::warn!`.
pub fn standardize_range(raw: &DataMatrix) -> Result<DataMatrix> {
    if raw.standardized {
        return Err(ClusterError::InvalidConfig(
            "data is already standardized".into(),
        ));
    }
    let n = raw.n_entities;
    let v = raw.n_features;
    let mut mean = vec![0.0; v];
    let mut min = vec![f64::INFINITY; v];
    let mut max = vec![f64::NEG_INFINITY; v];
    for row in raw.rows() {
        for j in 0..v {
            mean[j] += row[j];
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let range: Vec<f64> = (0..v).map(|j| max[j] - min[j]).collect();
    let constant: Vec<usize> = (0..v).filter(|&j| range[j] == 0.0).collect();
    if !constant.is_empty() {
        log::warn!("constant features mapped to zero: {constant:?}");
    }
    let mut values = Vec::with_capacity(n * v);
    for row in raw.rows() {
        for j in 0..v {
            values.push(if range[j] == 0.0 {
                0.0
            } else {
                (row[j] - mean[j]) / range[j]
            });
        }
    }
    DataMatrix::new_standardized(n, v, values)
}

/// Returns the input if it is already standardized, otherwise a standardized copy.
pub fn ensure_standardized(data: &DataMatrix) -> Result<Cow<'_, DataMatrix>> {
    if data.standardized {
        Ok(Cow::Borrowed(data))
    } else {
        standardize_range(data).map(Cow::Owned)
    }
}

/// Data matrix plus the optional ground-truth `label` column.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub data: DataMatrix,
    pub labels: Option<Vec<i64>>,
}

/// Reads a numeric CSV, dropping a trailing `label` column if the header names one.
pub fn read_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DataMatrix> {
    read_labeled_csv(path, has_header).map(|l| l.data)
}

pub fn read_labeled_csv(path: impl AsRef<Path>, has_header: bool) -> Result<LabeledData> {
    let file = std::fs::File::open(path)?;
    parse_labeled_csv(file, has_header)
}

pub fn parse_labeled_csv<R: std::io::Read>(reader: R, has_header: bool) -> Result<LabeledData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let label_col = if has_header {
        let headers = rdr.headers()?;
        match headers.iter().last() {
            Some(h) if h == LABEL_COLUMN => Some(headers.len() - 1),
            _ => None,
        }
    } else {
        None
    };

    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(ClusterError::InvalidData(format!(
                    "ragged row {row}: expected {w} fields, got {}",
                    record.len()
                )))
            }
            _ => {}
        }
        for (column, field) in record.iter().enumerate() {
            if Some(column) == label_col {
                let label = field.parse::<i64>().map_err(|e| ClusterError::Parse {
                    row,
                    column,
                    message: e.to_string(),
                })?;
                labels.as_mut().expect("label column present").push(label);
                continue;
            }
            let x = field.parse::<f64>().map_err(|e| ClusterError::Parse {
                row,
                column,
                message: format!("{e} ({field:?})"),
            })?;
            if !x.is_finite() {
                return Err(ClusterError::NonFinite { row, column });
            }
            values.push(x);
        }
    }
    let width = width.ok_or_else(|| ClusterError::Empty("CSV has no data rows".into()))?;
    let n_features = width - usize::from(label_col.is_some());
    if n_features == 0 {
        return Err(ClusterError::InvalidData("CSV has no feature columns".into()));
    }
    let n_entities = values.len() / n_features;
    let data = DataMatrix::new(n_entities, n_features, values)?;
    Ok(LabeledData { data, labels })
}

pub fn write_csv(data: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_labeled_csv(data, None, path)
}

/// Writes a header row `x1,…,xV[,label]` followed by one row per entity.
/// Floats use the shortest representation that parses back to the same bits.
pub fn write_labeled_csv(
    data: &DataMatrix,
    labels: Option<&[i64]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    emit_labeled_csv(data, labels, file)
}

pub fn emit_labeled_csv<W: std::io::Write>(
    data: &DataMatrix,
    labels: Option<&[i64]>,
    writer: W,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != data.n_entities() {
            return Err(ClusterError::DimensionMismatch {
                expected: data.n_entities(),
                got: l.len(),
            });
        }
    }
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header: Vec<String> = (1..=data.n_features()).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push(LABEL_COLUMN.to_string());
    }
    wtr.write_record(&header)?;
    let mut fields = Vec::with_capacity(header.len());
    for (i, row) in data.rows().enumerate() {
        fields.clear();
        fields.extend(row.iter().map(|x| format!("{x:?}")));
        if let Some(l) = labels {
            fields.push(l[i].to_string());
        }
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}
