use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Covariance {
    /// One shared variance: the mean per-dimension sample variance.
    Isotropic,
    Full,
}

/// Gaussian upper bound on differential entropy, in nats. A singular
/// covariance gives `−∞` with `degenerate` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub nats: f64,
    pub degenerate: bool,
}

fn sample_covariance(z: &Matrix) -> Matrix {
    let (n, d) = z.shape();
    let mean = z.column_means();
    let mut cov = Matrix::zeros(d, d);
    for row in z.iter_rows() {
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

/// `log det` of a symmetric matrix via Cholesky; `None` if not positive definite.
fn log_det_spd(a: &Matrix) -> Option<f64> {
    let d = a.rows();
    let mut l = Matrix::zeros(d, d);
    let mut log_det = 0.0;
    for j in 0..d {
        let mut s = a[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if !(s > 0.0) || !s.is_finite() {
            return None;
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        log_det += 2.0 * ljj.ln();
        for i in j + 1..d {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(log_det)
}

/// Full: `½·log((2πe)^d · det Σ̂)`. Isotropic: `(d/2)(1 + log(2πσ̂²))`.
pub fn latent_entropy(latents: &Matrix, assume: Covariance) -> Result<EntropyEstimate> {
    let (n, d) = latents.shape();
    if d == 0 {
        return Err(Error::invalid("latents have no dimensions"));
    }
    let need = match assume {
        Covariance::Full => d + 1,
        Covariance::Isotropic => 2,
    };
    if n < need {
        return Err(Error::InsufficientData(format!(
            "{n} latent rows, the estimator needs at least {need}"
        )));
    }
    let cov = sample_covariance(latents);
    let degenerate = EntropyEstimate {
        nats: f64::NEG_INFINITY,
        degenerate: true,
    };
    let df = d as f64;
    match assume {
        Covariance::Isotropic => {
            let var = (0..d).map(|j| cov[(j, j)]).sum::<f64>() / df;
            if !(var > 0.0) {
                return Ok(degenerate);
            }
            Ok(EntropyEstimate {
                nats: 0.5 * df * (1.0 + (2.0 * PI * var).ln()),
                degenerate: false,
            })
        }
        Covariance::Full => match log_det_spd(&cov) {
            Some(ld) => Ok(EntropyEstimate {
                nats: 0.5 * (df * (2.0 * PI * E).ln() + ld),
                degenerate: false,
            }),
            None => Ok(degenerate),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_det_matches_two_by_two() {
        let a = Matrix::from_rows(&[[4.0, 1.0], [1.0, 3.0]]).unwrap();
        assert!((log_det_spd(&a).unwrap() - 11f64.ln()).abs() < 1e-12);
        let s = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(log_det_spd(&s).is_none());
    }

    #[test]
    fn collinear_latents_are_degenerate() {
        let z = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let e = latent_entropy(&z, Covariance::Full).unwrap();
        assert!(e.degenerate && e.nats == f64::NEG_INFINITY);
        let e = latent_entropy(&z, Covariance::Isotropic).unwrap();
        assert!(!e.degenerate);
    }

    #[test]
    fn too_few_rows() {
        let z = Matrix::zeros(2, 2);
        assert!(matches!(
            latent_entropy(&z, Covariance::Full),
            Err(Error::InsufficientData(_))
        ));
    }
}
