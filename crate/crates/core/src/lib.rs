//! Deep semi-supervised anomaly detection.
//!
//! The crate trains a bias-free network `φ` so that normal data lands close
//! to a fixed center `c` while labeled anomalies are pushed away through an
//! inverse-distance penalty. The anomaly score is `‖φ(x) − c‖`. The
//! unsupervised one-class and soft-boundary objectives, autoencoder
//! pre-training, KDE and Isolation Forest baselines, ROC-AUC, the Wilcoxon
//! signed-rank test and an experiment harness live alongside.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod harness;
pub mod labels;
pub mod matrix;
pub mod model_file;
pub mod models;
pub mod nn;

pub use data::{Dataset, ScenarioConfig, SemiSupervisedSplit};
pub use error::{Error, Result};
pub use labels::{Polarity, SemiLabel};
pub use matrix::Matrix;
pub use models::{Autoencoder, DeepSadModel, TrainMode, TrainingConfig};
pub use nn::{Architecture, Mode, Network};
