//! Two-dimensional two-cluster data for demos and sanity checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::method::{run_method, Method, MethodKind, RunSettings};
use crate::data::SemiSupervisedSplit;
use crate::error::Result;
use crate::labels::Polarity;
use crate::matrix::Matrix;
use crate::models::TrainingConfig;
use crate::nn::Architecture;
use crate::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySpec {
    pub unlabeled: usize,
    pub labeled_normal: usize,
    pub labeled_anomaly: usize,
    pub test_normal: usize,
    pub test_anomaly: usize,
    pub normal_center: [f64; 2],
    pub normal_spread: f64,
    pub anomaly_center: [f64; 2],
    pub anomaly_spread: f64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            unlabeled: 400,
            labeled_normal: 20,
            labeled_anomaly: 20,
            test_normal: 200,
            test_anomaly: 100,
            normal_center: [0.0, 0.0],
            normal_spread: 0.5,
            anomaly_center: [2.5, 2.5],
            anomaly_spread: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyData {
    pub split: SemiSupervisedSplit,
    pub test: Dataset,
}

fn blob(rng: &mut ChaCha8Rng, n: usize, center: [f64; 2], spread: f64) -> Matrix {
    let noise = Normal::new(0.0, spread).expect("spread is positive");
    let data = (0..n)
        .flat_map(|_| [center[0] + noise.sample(rng), center[1] + noise.sample(rng)])
        .collect();
    Matrix::from_vec(n, 2, data).expect("length is 2n")
}

/// Normal blob (unlabeled plus a few labeled rows) and a labeled-anomaly
/// cluster; the test set mixes both.
pub fn toy_data(spec: &ToySpec, seed: u64) -> Result<ToyData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unlabeled = blob(
        &mut rng,
        spec.unlabeled,
        spec.normal_center,
        spec.normal_spread,
    );
    let ln = blob(
        &mut rng,
        spec.labeled_normal,
        spec.normal_center,
        spec.normal_spread,
    );
    let la = blob(
        &mut rng,
        spec.labeled_anomaly,
        spec.anomaly_center,
        spec.anomaly_spread,
    );
    let tn = blob(
        &mut rng,
        spec.test_normal,
        spec.normal_center,
        spec.normal_spread,
    );
    let ta = blob(
        &mut rng,
        spec.test_anomaly,
        spec.anomaly_center,
        spec.anomaly_spread,
    );
    let mut targets = vec![Polarity::Normal; spec.labeled_normal];
    targets.extend(std::iter::repeat_n(Polarity::Anomaly, spec.labeled_anomaly));
    let mut split = SemiSupervisedSplit::new(unlabeled, ln.vstack(&la)?, targets)?;
    split.unlabeled_truth = Some(vec![Polarity::Normal; spec.unlabeled]);
    let mut labels = vec![Polarity::Normal; spec.test_normal];
    labels.extend(std::iter::repeat_n(Polarity::Anomaly, spec.test_anomaly));
    let test = Dataset::new(tn.vstack(&ta)?).with_anomaly_labels(labels)?;
    Ok(ToyData { split, test })
}

/// Small network and a faster schedule suited to the 2-D toy problem.
pub fn toy_settings() -> RunSettings {
    let cfg = TrainingConfig {
        search_epochs: 30,
        search_lr: 1e-3,
        finetune_epochs: 60,
        finetune_lr: 1e-4,
        batch_size: 64,
        ..TrainingConfig::default()
    };
    RunSettings {
        widths: Some("16-8-2".into()),
        train: TrainingConfig {
            search_lr: 1e-2,
            ..cfg.clone()
        },
        pretrain: cfg,
        ..RunSettings::full()
    }
}

/// Scores of deep-sad and supervised models on a dense grid covering the toy
/// data, as delimited text with header `x,y,score_deepsad,score_supervised`.
pub fn demo_toy(seed: u64, resolution: usize) -> Result<String> {
    let data = toy_data(&ToySpec::default(), seed)?;
    let settings = toy_settings();
    let (rows, _) = data.split.training_rows()?;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for r in rows.iter_rows() {
        for j in 0..2 {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let steps = resolution.max(2);
    let coord = |j: usize, k: usize| {
        let pad = 0.25 * (hi[j] - lo[j]);
        (lo[j] - pad) + (hi[j] - lo[j] + 2.0 * pad) * k as f64 / (steps - 1) as f64
    };
    let mut grid = Vec::with_capacity(steps * steps * 2);
    for a in 0..steps {
        for b in 0..steps {
            grid.push(coord(0, b));
            grid.push(coord(1, a));
        }
    }
    let grid = Matrix::from_vec(steps * steps, 2, grid)?;
    let arch = settings.architecture(2, "toy", None)?;
    let sad = run_method(
        &Method::new(MethodKind::DeepSad),
        &settings,
        &arch,
        &data.split,
        &grid,
        seed,
    )?;
    let sup = run_method(
        &Method::new(MethodKind::Supervised),
        &settings,
        &arch,
        &data.split,
        &grid,
        seed,
    )?;
    let mut out = String::from("x,y,score_deepsad,score_supervised\n");
    for (i, r) in grid.iter_rows().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", r[0], r[1], sad[i], sup[i]));
    }
    Ok(out)
}

/// Architecture used for toy runs.
pub fn toy_architecture() -> Result<Architecture> {
    toy_settings().architecture(2, "toy", None)
}
