use super::iforest::{iforest_fit, IForestConfig};
use super::kde::kde_fit;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::models::Autoencoder;

/// A shallow detector and its fitting parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ShallowSpec {
    Kde {
        grid: Vec<f64>,
        folds: usize,
        seed: u64,
    },
    IForest(IForestConfig),
}

impl ShallowSpec {
    pub fn kde_default(seed: u64) -> Self {
        ShallowSpec::Kde {
            grid: super::kde::default_bandwidth_grid(),
            folds: super::kde::DEFAULT_FOLDS,
            seed,
        }
    }

    /// Fits on `train` and scores `test` (higher = more anomalous).
    pub fn fit_score(&self, train: &Matrix, test: &Matrix) -> Result<Vec<f64>> {
        match self {
            ShallowSpec::Kde { grid, folds, seed } => {
                kde_fit(train, grid, *folds, *seed)?.score(test)
            }
            ShallowSpec::IForest(cfg) => iforest_fit(train, cfg)?.score(test),
        }
    }
}

/// Runs the shallow detector on encoder codes of `train` and `test`.
pub fn hybrid_apply(
    ae: &Autoencoder,
    shallow: &ShallowSpec,
    train: &Matrix,
    test: &Matrix,
) -> Result<Vec<f64>> {
    let codes_train = ae.encode(train)?;
    let codes_test = ae.encode(test)?;
    shallow.fit_score(&codes_train, &codes_test)
}
