use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autoencoder::Autoencoder;
use super::loss::{
    bce_loss, deep_sad_loss, one_class_loss, soft_boundary_loss, update_radius, SoftBoundaryState,
    DEFAULT_INVERSE_EPS,
};
use super::schedule::{prime_batch_norm, run_schedule, BatchObjective, EpochLoss, TrainingConfig};
use crate::data::SemiSupervisedSplit;
use crate::error::{Error, Result};
use crate::labels::SemiLabel;
use crate::matrix::{squared_distance, Matrix};
use crate::nn::{Architecture, DenseLayer, Layer, LeakyRelu, Network, DEFAULT_LEAKINESS};

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrainMode {
    DeepSad { eta: f64, inverse_eps: f64 },
    OneClass,
    SoftBoundary { nu: f64 },
    SupervisedBce,
}

impl TrainMode {
    pub fn deep_sad(eta: f64) -> Self {
        TrainMode::DeepSad {
            eta,
            inverse_eps: DEFAULT_INVERSE_EPS,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TrainMode::DeepSad { eta, inverse_eps } => {
                if !(eta > 0.0) || !(inverse_eps > 0.0) {
                    return Err(Error::invalid(format!(
                        "eta and inverse_eps must be positive, got {eta} and {inverse_eps}"
                    )));
                }
            }
            TrainMode::SoftBoundary { nu } => {
                SoftBoundaryState::new(nu)?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// Which hypersphere objective produced a [`DeepSadModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    DeepSad,
    OneClass,
    SoftBoundary(SoftBoundaryState),
}

/// Trained bias-free network with its fixed center.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepSadModel {
    pub phi: Network,
    pub center: Vec<f64>,
    pub eta: f64,
    pub lambda: f64,
    pub inverse_eps: f64,
    pub variant: Variant,
}

impl DeepSadModel {
    pub fn validate(&self) -> Result<()> {
        if self.center.len() != self.phi.output_dim() {
            return Err(Error::shape(format!(
                "center has {} entries, network outputs {}",
                self.center.len(),
                self.phi.output_dim()
            )));
        }
        if !(self.eta > 0.0) || !(self.inverse_eps > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::invalid(
                "eta, inverse_eps must be positive and lambda non-negative",
            ));
        }
        Ok(())
    }

    /// `‖φ(x) − c‖` per row, inference mode.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        let z = self.phi.predict(x)?;
        Ok(z.iter_rows()
            .map(|r| squared_distance(r, &self.center).sqrt())
            .collect())
    }

    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        self.phi.predict(x)
    }
}

/// φ followed by a leaky ReLU and one scalar output unit with bias.
/// The score is the anomaly logit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub net: Network,
}

impl ClassifierModel {
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.net.predict(x)?.into_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Hypersphere(DeepSadModel),
    Classifier(ClassifierModel),
}

impl TrainedModel {
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Hypersphere(m) => m.score(x),
            TrainedModel::Classifier(m) => m.score(x),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            TrainedModel::Hypersphere(m) => m.phi.input_dim(),
            TrainedModel::Classifier(m) => m.net.input_dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: Vec<EpochLoss>,
}

/// Per-dimension mean of `φ(x)` in inference mode.
pub fn init_center(phi: &Network, data: &Matrix) -> Result<Vec<f64>> {
    if data.rows() == 0 {
        return Err(Error::invalid("center needs at least one row"));
    }
    Ok(phi.predict(data)?.column_means())
}

struct SadObjective<'a> {
    labels: &'a [SemiLabel],
    center: &'a [f64],
    eta: f64,
    inverse_eps: f64,
}

impl BatchObjective for SadObjective<'_> {
    fn loss(&self, outputs: &Matrix, indices: &[usize]) -> Result<(f64, Matrix)> {
        let labels: Vec<SemiLabel> = indices.iter().map(|&i| self.labels[i]).collect();
        let o = deep_sad_loss(outputs, &labels, self.center, self.eta, self.inverse_eps)?;
        Ok((o.loss, o.grad))
    }
}

struct OneClassObjective<'a> {
    center: &'a [f64],
}

impl BatchObjective for OneClassObjective<'_> {
    fn loss(&self, outputs: &Matrix, _indices: &[usize]) -> Result<(f64, Matrix)> {
        let o = one_class_loss(outputs, self.center)?;
        Ok((o.loss, o.grad))
    }
}

struct SoftBoundaryObjective<'a> {
    center: &'a [f64],
    state: SoftBoundaryState,
}

impl BatchObjective for SoftBoundaryObjective<'_> {
    fn loss(&self, outputs: &Matrix, _indices: &[usize]) -> Result<(f64, Matrix)> {
        let o = soft_boundary_loss(outputs, self.center, &self.state)?;
        Ok((o.loss, o.grad))
    }

    fn after_step(&mut self, outputs: &Matrix, _indices: &[usize]) -> Result<()> {
        let d: Vec<f64> = outputs
            .iter_rows()
            .map(|r| squared_distance(r, self.center))
            .collect();
        self.state.radius_sq = update_radius(&d, self.state.nu)?;
        Ok(())
    }
}

struct BceObjective<'a> {
    targets: &'a [f64],
}

impl BatchObjective for BceObjective<'_> {
    fn loss(&self, outputs: &Matrix, indices: &[usize]) -> Result<(f64, Matrix)> {
        let t: Vec<f64> = indices.iter().map(|&i| self.targets[i]).collect();
        let o = bce_loss(outputs, &t)?;
        Ok((o.loss, o.grad))
    }
}

fn initial_phi(
    arch: &Architecture,
    pretrained: Option<&Autoencoder>,
    rng: &mut ChaCha8Rng,
) -> Result<Network> {
    match pretrained {
        Some(ae) => {
            if ae.encoder.architecture() != *arch {
                return Err(Error::shape(
                    "pretrained encoder architecture differs from the requested network",
                ));
            }
            Ok(ae.encoder.clone())
        }
        None => Network::new(arch, rng),
    }
}

/// Trains one model on a semi-supervised split.
///
/// Hypersphere modes fix the center before the first epoch from unlabeled rows
/// and labeled normals. Without a pretrained encoder, batch-norm running
/// statistics are first primed with one pass over the training rows so the
/// center is computed from meaningful inference statistics.
pub fn train(
    split: &SemiSupervisedSplit,
    arch: &Architecture,
    cfg: &TrainingConfig,
    mode: TrainMode,
    pretrained: Option<&Autoencoder>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    mode.validate()?;
    if split.dim() != arch.input_dim {
        return Err(Error::shape(format!(
            "data has {} features, architecture expects {}",
            split.dim(),
            arch.input_dim
        )));
    }
    if arch.has_bias() && !matches!(mode, TrainMode::SupervisedBce) {
        return Err(Error::invalid(
            "hypersphere networks must not have bias terms",
        ));
    }
    let (x, labels) = split.training_rows()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut phi = initial_phi(arch, pretrained, &mut rng)?;

    if let TrainMode::SupervisedBce = mode {
        let rep = phi.output_dim();
        let head = Network::from_layers(
            rep,
            vec![
                Layer::LeakyRelu(LeakyRelu::new(DEFAULT_LEAKINESS)?),
                Layer::Dense(DenseLayer {
                    weights: crate::nn::glorot_init(rep, 1, &mut rng)?,
                    bias: Some(vec![0.0]),
                }),
            ],
        )?;
        let mut net = phi.concat(&head)?;
        // Unlabeled rows count as normal.
        let targets: Vec<f64> = labels
            .iter()
            .map(|l| if *l == SemiLabel::Anomaly { 1.0 } else { 0.0 })
            .collect();
        let log = run_schedule(&mut net, &x, cfg, &mut BceObjective { targets: &targets })?;
        return Ok(TrainOutcome {
            model: TrainedModel::Classifier(ClassifierModel { net }),
            log,
        });
    }

    let center_rows = split.center_rows();
    if center_rows.rows() == 0 {
        return Err(Error::invalid(
            "no unlabeled or labeled-normal rows to place the center",
        ));
    }
    if pretrained.is_none() {
        prime_batch_norm(&mut phi, &x, cfg.batch_size)?;
    }
    let center = init_center(&phi, &center_rows)?;
    let (log, variant, eta, inverse_eps) = match mode {
        TrainMode::DeepSad { eta, inverse_eps } => {
            let mut obj = SadObjective {
                labels: &labels,
                center: &center,
                eta,
                inverse_eps,
            };
            (
                run_schedule(&mut phi, &x, cfg, &mut obj)?,
                Variant::DeepSad,
                eta,
                inverse_eps,
            )
        }
        TrainMode::OneClass => {
            let log = run_schedule(
                &mut phi,
                &x,
                cfg,
                &mut OneClassObjective { center: &center },
            )?;
            (log, Variant::OneClass, 1.0, DEFAULT_INVERSE_EPS)
        }
        TrainMode::SoftBoundary { nu } => {
            let mut obj = SoftBoundaryObjective {
                center: &center,
                state: SoftBoundaryState::new(nu)?,
            };
            let log = run_schedule(&mut phi, &x, cfg, &mut obj)?;
            (
                log,
                Variant::SoftBoundary(obj.state),
                1.0,
                DEFAULT_INVERSE_EPS,
            )
        }
        TrainMode::SupervisedBce => unreachable!("handled above"),
    };
    Ok(TrainOutcome {
        model: TrainedModel::Hypersphere(DeepSadModel {
            phi,
            center,
            eta,
            lambda: cfg.weight_decay,
            inverse_eps,
            variant,
        }),
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Polarity;

    fn tiny_split() -> SemiSupervisedSplit {
        let u = Matrix::from_vec(
            6,
            2,
            vec![
                0.1, 0.2, -0.3, 0.1, 0.0, 0.05, 0.2, -0.1, -0.1, -0.2, 0.3, 0.0,
            ],
        )
        .unwrap();
        let l = Matrix::from_rows(&[[3.0, 3.0]]).unwrap();
        SemiSupervisedSplit::new(u, l, vec![Polarity::Anomaly]).unwrap()
    }

    #[test]
    fn center_is_mean() {
        let net = Network::new(
            &Architecture::mlp(2, &[], 2, false),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let mut id = net.clone();
        if let Some(w) = id.params_mut().into_iter().next() {
            w.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        }
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        assert_eq!(init_center(&id, &x).unwrap(), vec![1.0, 1.0]);
        assert!(init_center(&id, &Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn score_of_three_four_is_five() {
        let mut phi = Network::new(
            &Architecture::mlp(2, &[], 2, false),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        phi.params_mut()[0].copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let m = DeepSadModel {
            phi,
            center: vec![0.0, 0.0],
            eta: 1.0,
            lambda: 0.0,
            inverse_eps: 1e-6,
            variant: Variant::DeepSad,
        };
        let s = m
            .score(&Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0]]).unwrap())
            .unwrap();
        assert_eq!(s, vec![5.0, 0.0]);
    }

    #[test]
    fn bias_in_hypersphere_arch_is_rejected() {
        let arch = Architecture::mlp(2, &[], 2, false).decoder().unwrap();
        let cfg = TrainingConfig::default().with_total_epochs(1);
        let err = train(&tiny_split(), &arch, &cfg, TrainMode::OneClass, None).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn only_anomalies_is_rejected() {
        let l = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0]]).unwrap();
        let split =
            SemiSupervisedSplit::new(Matrix::zeros(0, 2), l, vec![Polarity::Anomaly; 2]).unwrap();
        let arch = Architecture::mlp(2, &[], 2, false);
        let cfg = TrainingConfig::default().with_total_epochs(1);
        assert!(matches!(
            train(&split, &arch, &cfg, TrainMode::deep_sad(1.0), None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn supervised_head_has_scalar_output() {
        let arch = Architecture::mlp(2, &[4], 2, true);
        let cfg = TrainingConfig::default().with_total_epochs(2);
        let out = train(&tiny_split(), &arch, &cfg, TrainMode::SupervisedBce, None).unwrap();
        assert_eq!(out.log.len(), 2);
        let s = out.model.score(&Matrix::zeros(3, 2)).unwrap();
        assert_eq!(s.len(), 3);
    }
}
