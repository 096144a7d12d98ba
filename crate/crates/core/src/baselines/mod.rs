//! Shallow detectors and their hybrid use on autoencoder codes.

mod hybrid;
mod iforest;
mod kde;

pub use hybrid::{hybrid_apply, ShallowSpec};
pub use iforest::{
    average_path_length, harmonic, iforest_fit, IForestConfig, IsolationForest, IsolationTree, Node,
};
pub use kde::{default_bandwidth_grid, kde_cv_curve, kde_fit, KdeModel, DEFAULT_FOLDS};
