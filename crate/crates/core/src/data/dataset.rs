use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::labels::Polarity;
use crate::matrix::Matrix;

pub const LABEL_COLUMN: &str = "label";
pub const CLASS_COLUMN: &str = "class";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub feature_names: Vec<String>,
    pub class_labels: Option<Vec<i64>>,
    pub anomaly_labels: Option<Vec<Polarity>>,
}

impl Dataset {
    pub fn new(features: Matrix) -> Self {
        let feature_names = (0..features.cols()).map(|j| format!("x{j}")).collect();
        Self {
            features,
            feature_names,
            class_labels: None,
            anomaly_labels: None,
        }
    }

    pub fn with_anomaly_labels(mut self, labels: Vec<Polarity>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::shape(format!(
                "{} anomaly labels for {} rows",
                labels.len(),
                self.len()
            )));
        }
        self.anomaly_labels = Some(labels);
        Ok(self)
    }

    pub fn with_class_labels(mut self, classes: Vec<i64>) -> Result<Self> {
        if classes.len() != self.len() {
            return Err(Error::shape(format!(
                "{} class labels for {} rows",
                classes.len(),
                self.len()
            )));
        }
        self.class_labels = Some(classes);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows `indices` in the given order, labels carried along.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            feature_names: self.feature_names.clone(),
            class_labels: self
                .class_labels
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            anomaly_labels: self
                .anomaly_labels
                .as_ref()
                .map(|a| indices.iter().map(|&i| a[i]).collect()),
        }
    }

    pub fn require_anomaly_labels(&self) -> Result<&[Polarity]> {
        self.anomaly_labels
            .as_deref()
            .ok_or_else(|| Error::invalid("dataset has no `label` column"))
    }

    pub fn require_class_labels(&self) -> Result<&[i64]> {
        self.class_labels
            .as_deref()
            .ok_or_else(|| Error::invalid("dataset has no `class` column"))
    }
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("`{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("`{cell}` is not finite"),
        });
    }
    Ok(v)
}

fn parse_integer(cell: &str, row: usize, column: &str) -> Result<i64> {
    let t = cell.trim();
    if let Ok(v) = t.parse::<i64>() {
        return Ok(v);
    }
    let v = parse_number(t, row, column)?;
    if v.fract() != 0.0 || v.abs() > 9.0e15 {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("`{cell}` is not an integer"),
        });
    }
    Ok(v as i64)
}

/// Reads a headed CSV. Columns named `label` (+1/−1) and `class` (integer) are
/// reserved; every other column is a numeric feature. Rows are numbered from 1
/// (the first data row) in parse errors.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Format("missing header row".into()));
    }
    let label_col = headers.iter().position(|h| h == LABEL_COLUMN);
    let class_col = headers.iter().position(|h| h == CLASS_COLUMN);
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&j| Some(j) != label_col && Some(j) != class_col)
        .collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut classes = Vec::new();
    let mut rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(Error::Format(format!(
                "row {row} has {} fields, header has {}",
                rec.len(),
                headers.len()
            )));
        }
        for &j in &feature_cols {
            values.push(parse_number(&rec[j], row, &headers[j])?);
        }
        if let Some(j) = label_col {
            let v = parse_integer(&rec[j], row, LABEL_COLUMN)?;
            let p = i8::try_from(v)
                .ok()
                .and_then(|v| Polarity::from_i8(v).ok())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: LABEL_COLUMN.into(),
                    message: format!("label must be +1 or -1, got {v}"),
                })?;
            labels.push(p);
        }
        if let Some(j) = class_col {
            classes.push(parse_integer(&rec[j], row, CLASS_COLUMN)?);
        }
        rows += 1;
    }
    let features = Matrix::from_vec(rows, feature_cols.len(), values)?;
    Ok(Dataset {
        features,
        feature_names: feature_cols.iter().map(|&j| headers[j].clone()).collect(),
        class_labels: class_col.map(|_| classes),
        anomaly_labels: label_col.map(|_| labels),
    })
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    read_csv(std::io::BufReader::new(file))
}

/// Writes features with shortest round-trip formatting, then `label` and
/// `class` columns when present.
pub fn write_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    if data.anomaly_labels.is_some() {
        header.push(LABEL_COLUMN);
    }
    if data.class_labels.is_some() {
        header.push(CLASS_COLUMN);
    }
    w.write_record(&header)
        .map_err(|e| Error::Format(e.to_string()))?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.features.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(l) = &data.anomaly_labels {
            rec.push(l[i].as_i8().to_string());
        }
        if let Some(c) = &data.class_labels {
            rec.push(c[i].to_string());
        }
        w.write_record(&rec)
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), data)
}
