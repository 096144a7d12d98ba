use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-feature affine map `(x − offset) / divisor`, fit on a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub kind: ScalerKind,
    pub offset: Vec<f64>,
    pub divisor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    MinMax,
    Standardize,
}

impl std::str::FromStr for ScalerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(ScalerKind::MinMax),
            "standardize" => Ok(ScalerKind::Standardize),
            _ => Err(Error::invalid(format!(
                "unknown preprocessing `{s}` (expected minmax or standardize)"
            ))),
        }
    }
}

impl Scaler {
    pub fn fit(kind: ScalerKind, train: &Matrix) -> Result<Self> {
        match kind {
            ScalerKind::MinMax => Self::fit_minmax(train),
            ScalerKind::Standardize => Self::fit_standardize(train),
        }
    }

    /// Maps each training feature onto `[0, 1]`. Constant features map to 0.
    pub fn fit_minmax(train: &Matrix) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("cannot fit a scaler on an empty matrix"));
        }
        let d = train.cols();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in train.iter_rows() {
            for j in 0..d {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        let divisor = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect();
        Ok(Self {
            kind: ScalerKind::MinMax,
            offset: lo,
            divisor,
        })
    }

    /// Zero mean, unit population standard deviation. Constant features are
    /// only centered.
    pub fn fit_standardize(train: &Matrix) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("cannot fit a scaler on an empty matrix"));
        }
        let mean = train.column_means();
        let n = train.rows() as f64;
        let mut var = vec![0.0; train.cols()];
        for row in train.iter_rows() {
            for (j, v) in row.iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        let divisor = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            kind: ScalerKind::Standardize,
            offset: mean,
            divisor,
        })
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.offset.len() {
            return Err(Error::shape(format!(
                "scaler fit on {} features, got {}",
                self.offset.len(),
                x.cols()
            )));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, o), s) in out
                .row_mut(i)
                .iter_mut()
                .zip(&self.offset)
                .zip(&self.divisor)
            {
                *v = (*v - o) / s;
            }
        }
        Ok(out)
    }
}

/// Fits on `train` and returns the transformed train matrix, each of
/// `apply_to` transformed with train statistics, and the scaler.
pub fn fit_transform(
    kind: ScalerKind,
    train: &Matrix,
    apply_to: &[&Matrix],
) -> Result<(Matrix, Vec<Matrix>, Scaler)> {
    let s = Scaler::fit(kind, train)?;
    let t = s.transform(train)?;
    let others = apply_to
        .iter()
        .map(|m| s.transform(m))
        .collect::<Result<_>>()?;
    Ok((t, others, s))
}

pub fn minmax_scale(train: &Matrix, apply_to: &[&Matrix]) -> Result<(Matrix, Vec<Matrix>, Scaler)> {
    fit_transform(ScalerKind::MinMax, train, apply_to)
}

pub fn standardize(train: &Matrix, apply_to: &[&Matrix]) -> Result<(Matrix, Vec<Matrix>, Scaler)> {
    fit_transform(ScalerKind::Standardize, train, apply_to)
}
