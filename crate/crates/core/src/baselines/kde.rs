use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

pub const DEFAULT_FOLDS: usize = 5;

/// `2^0.5, 2^1, …, 2^5`.
pub fn default_bandwidth_grid() -> Vec<f64> {
    (1..=10).map(|k| 2f64.powf(0.5 * k as f64)).collect()
}

/// Gaussian kernel density estimate over stored training points.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    pub points: Matrix,
    pub bandwidth: f64,
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log (1/n) Σᵢ N(x; xᵢ, h²I)` given the squared distances to the n points.
fn log_density_from_distances(dist_sq: &[f64], h: f64, dim: usize) -> f64 {
    let inv = 1.0 / (2.0 * h * h);
    let terms: Vec<f64> = dist_sq.iter().map(|d| -d * inv).collect();
    log_sum_exp(&terms) - (dist_sq.len() as f64).ln() - 0.5 * dim as f64 * (2.0 * PI * h * h).ln()
}

impl KdeModel {
    pub fn new(points: Matrix, bandwidth: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("KDE needs at least one training point"));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self { points, bandwidth })
    }

    pub fn log_density(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.points.cols() {
            return Err(Error::shape(format!(
                "KDE fit on {} features, got {}",
                self.points.cols(),
                x.cols()
            )));
        }
        let rows: Vec<&[f64]> = x.iter_rows().collect();
        Ok(rows
            .par_iter()
            .map(|r| {
                let d: Vec<f64> = self
                    .points
                    .iter_rows()
                    .map(|p| squared_distance(r, p))
                    .collect();
                log_density_from_distances(&d, self.bandwidth, self.points.cols())
            })
            .collect())
    }

    /// Anomaly score `−log density`.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.log_density(x)?.into_iter().map(|v| -v).collect())
    }
}

/// Mean held-out log-likelihood of each grid bandwidth under `folds`-fold
/// cross-validation. Folds are contiguous blocks of a seeded permutation; each
/// row is held out exactly once.
pub fn kde_cv_curve(data: &Matrix, grid: &[f64], folds: usize, seed: u64) -> Result<Vec<f64>> {
    if grid.is_empty() || grid.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::invalid(
            "bandwidth grid must be non-empty and positive",
        ));
    }
    if folds < 2 || data.rows() < folds {
        return Err(Error::invalid(format!(
            "{} rows cannot form {folds} folds",
            data.rows()
        )));
    }
    let n = data.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n];
    for k in 0..folds {
        for &i in &order[k * n / folds..(k + 1) * n / folds] {
            fold_of[i] = k;
        }
    }
    let per_row: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d: Vec<f64> = (0..n)
                .filter(|&j| fold_of[j] != fold_of[i])
                .map(|j| squared_distance(data.row(i), data.row(j)))
                .collect();
            grid.iter()
                .map(|&h| log_density_from_distances(&d, h, data.cols()))
                .collect()
        })
        .collect();
    Ok((0..grid.len())
        .map(|g| per_row.iter().map(|r| r[g]).sum::<f64>() / n as f64)
        .collect())
}

/// Picks the grid bandwidth with the largest held-out log-likelihood (first
/// one on ties) and keeps every row as a kernel center.
pub fn kde_fit(data: &Matrix, grid: &[f64], folds: usize, seed: u64) -> Result<KdeModel> {
    let curve = kde_cv_curve(data, grid, folds, seed)?;
    let mut best = 0;
    for (g, v) in curve.iter().enumerate() {
        if *v > curve[best] {
            best = g;
        }
    }
    KdeModel::new(data.clone(), grid[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values() {
        let g = default_bandwidth_grid();
        assert_eq!(g.len(), 10);
        assert!((g[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(g[9], 32.0);
    }

    #[test]
    fn kernel_at_zero() {
        let m = KdeModel::new(Matrix::from_rows(&[[0.0]]).unwrap(), 1.0).unwrap();
        let s = m.score(&Matrix::from_rows(&[[0.0]]).unwrap()).unwrap();
        assert!((s[0] - 0.5 * (2.0 * PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn far_point_is_finite() {
        let m = KdeModel::new(Matrix::from_rows(&[[0.0], [1.0]]).unwrap(), 0.5).unwrap();
        let s = m.score(&Matrix::from_rows(&[[1e4]]).unwrap()).unwrap();
        assert!(s[0].is_finite() && s[0] > 1e6);
    }

    #[test]
    fn single_value_grid_and_fold_check() {
        let x = Matrix::from_vec(6, 1, (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(kde_fit(&x, &[0.7], 5, 0).unwrap().bandwidth, 0.7);
        assert!(kde_fit(&x, &[0.7], 7, 0).is_err());
    }
}
