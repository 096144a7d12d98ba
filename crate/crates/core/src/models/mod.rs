//! Autoencoder pre-training, hypersphere objectives, the supervised
//! classifier and the latent-entropy diagnostic.

mod autoencoder;
mod entropy;
mod loss;
mod schedule;
mod train;

pub use autoencoder::{pretrain_autoencoder, Autoencoder};
pub use entropy::{latent_entropy, Covariance, EntropyEstimate};
pub use loss::{
    bce_loss, deep_sad_loss, mse_loss, one_class_loss, sigmoid, soft_boundary_loss, update_radius,
    LossOutput, SoftBoundaryState, DEFAULT_INVERSE_EPS,
};
pub use schedule::{format_loss_log, EpochLoss, Phase, TrainingConfig};
pub use train::{
    init_center, train, ClassifierModel, DeepSadModel, TrainMode, TrainOutcome, TrainedModel,
    Variant,
};
