//! End-to-end training behaviour on small synthetic data.

use deepsad_core::baselines::{hybrid_apply, ShallowSpec};
use deepsad_core::eval::auc_roc;
use deepsad_core::harness::{toy_architecture, toy_data, toy_settings, ToySpec};
use deepsad_core::models::{
    latent_entropy, pretrain_autoencoder, train, Autoencoder, Covariance, TrainMode, TrainedModel,
};
use deepsad_core::{Architecture, Matrix, SemiSupervisedSplit, TrainingConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Matrix::from_vec(rows, cols, v).unwrap()
}

fn short(epochs: usize, seed: u64) -> TrainingConfig {
    TrainingConfig {
        search_epochs: epochs / 3,
        search_lr: 1e-3,
        finetune_epochs: epochs - epochs / 3,
        finetune_lr: 1e-4,
        batch_size: 64,
        seed,
        ..TrainingConfig::default()
    }
}

fn hypersphere(model: &TrainedModel) -> &deepsad_core::DeepSadModel {
    match model {
        TrainedModel::Hypersphere(m) => m,
        other => panic!("expected a hypersphere model, got {other:?}"),
    }
}

#[test]
fn without_labels_deep_sad_follows_one_class_epoch_by_epoch() {
    let split = SemiSupervisedSplit::unsupervised(gaussian(500, 6, 1)).unwrap();
    let arch = Architecture::mlp(6, &[16, 8], 4, true);
    let cfg = short(10, 3);
    let sad = train(&split, &arch, &cfg, TrainMode::deep_sad(1.0), None).unwrap();
    let oc = train(&split, &arch, &cfg, TrainMode::OneClass, None).unwrap();
    assert_eq!(sad.log.len(), 10);
    for (a, b) in sad.log.iter().zip(&oc.log) {
        assert!((a.loss - b.loss).abs() <= 1e-12, "{a:?} vs {b:?}");
    }
}

#[test]
fn same_seed_same_parameters() {
    let d = toy_data(&ToySpec::default(), 5).unwrap();
    let arch = toy_architecture().unwrap();
    let run = || {
        train(
            &d.split,
            &arch,
            &short(6, 9),
            TrainMode::deep_sad(1.0),
            None,
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.log, b.log);
    assert_eq!(hypersphere(&a.model), hypersphere(&b.model));
    let other = train(
        &d.split,
        &arch,
        &short(6, 10),
        TrainMode::deep_sad(1.0),
        None,
    )
    .unwrap();
    assert_ne!(hypersphere(&a.model).phi, hypersphere(&other.model).phi);
}

#[test]
fn labeled_anomaly_cluster_scores_higher_after_training() {
    let d = toy_data(&ToySpec::default(), 0).unwrap();
    let arch = toy_architecture().unwrap();
    let s = toy_settings();
    let out = train(&d.split, &arch, &s.train, TrainMode::deep_sad(1.0), None).unwrap();
    let scores = out.model.score(&d.test.features).unwrap();
    let labels = d.test.anomaly_labels.as_ref().unwrap();
    let mean = |anom: bool| {
        let v: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, l)| l.is_anomaly() == anom)
            .map(|(s, _)| *s)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(true) > mean(false));
    assert!(auc_roc(&scores, labels).unwrap() > 0.9);
}

#[test]
fn zero_epochs_keeps_the_pretrained_encoder() {
    let x = gaussian(50, 5, 2);
    let arch = Architecture::mlp(5, &[8], 3, true);
    let (ae, _) = pretrain_autoencoder(&x, &arch, &short(3, 0)).unwrap();
    let split = SemiSupervisedSplit::unsupervised(x).unwrap();
    let out = train(&split, &arch, &short(0, 0), TrainMode::OneClass, Some(&ae)).unwrap();
    assert_eq!(hypersphere(&out.model).phi, ae.encoder);
}

#[test]
fn autoencoder_fits_a_constant() {
    let p = [0.3, -0.7, 0.2, 0.9];
    let x = Matrix::from_rows(&vec![p; 200]).unwrap();
    let arch = Architecture::mlp(4, &[8], 2, false);
    let cfg = TrainingConfig {
        search_lr: 1e-2,
        finetune_lr: 1e-3,
        ..TrainingConfig::default()
    };
    let (ae, log) = pretrain_autoencoder(&x, &arch, &cfg).unwrap();
    assert!(ae.mse(&x).unwrap() < 1e-4, "{:?}", log.last());
}

#[test]
fn isotropic_entropy_of_standard_normal() {
    let z = gaussian(100_000, 2, 7);
    let h = latent_entropy(&z, Covariance::Isotropic).unwrap().nats;
    let truth = 1.0 + (2.0 * std::f64::consts::PI).ln();
    assert!((h - truth).abs() / truth < 0.05, "{h} vs {truth}");
}

#[test]
fn doubling_latents_adds_d_log_two() {
    let z = gaussian(400, 3, 8);
    let doubled = z.map(|v| 2.0 * v);
    let a = latent_entropy(&z, Covariance::Full).unwrap().nats;
    let b = latent_entropy(&doubled, Covariance::Full).unwrap().nats;
    assert!((b - a - 3.0 * 2f64.ln()).abs() < 1e-9);
}

#[test]
fn hybrid_on_untrained_codes_is_finite() {
    let x = gaussian(60, 4, 3);
    let ae = Autoencoder::init(&Architecture::mlp(4, &[6], 2, true), 0).unwrap();
    let s = hybrid_apply(&ae, &ShallowSpec::kde_default(0), &x, &x).unwrap();
    assert_eq!(s.len(), 60);
    assert!(s.iter().all(|v| v.is_finite()));
}

#[test]
fn hybrid_kde_separates_the_toy_clusters() {
    let d = toy_data(&ToySpec::default(), 1).unwrap();
    let arch = toy_architecture().unwrap();
    let s = toy_settings();
    let (x, _) = d.split.training_rows().unwrap();
    let (ae, _) = pretrain_autoencoder(&x, &arch, &s.pretrain).unwrap();
    let normal = d.split.unlabeled.clone();
    let scores =
        hybrid_apply(&ae, &ShallowSpec::kde_default(0), &normal, &d.test.features).unwrap();
    let auc = auc_roc(&scores, d.test.anomaly_labels.as_ref().unwrap()).unwrap();
    assert!(auc > 0.9, "{auc}");
}

#[test]
fn soft_boundary_and_supervised_train() {
    let d = toy_data(&ToySpec::default(), 2).unwrap();
    let arch = toy_architecture().unwrap();
    let cfg = short(9, 0);
    let sb = train(
        &d.split,
        &arch,
        &cfg,
        TrainMode::SoftBoundary { nu: 0.1 },
        None,
    )
    .unwrap();
    assert!(sb.log.iter().all(|e| e.loss.is_finite()));
    let sup = train(&d.split, &arch, &cfg, TrainMode::SupervisedBce, None).unwrap();
    assert!(matches!(sup.model, TrainedModel::Classifier(_)));
}
