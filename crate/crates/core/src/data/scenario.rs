use std::collections::BTreeSet;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::labels::{Polarity, SemiLabel};
use crate::matrix::Matrix;

/// Which anomaly classes supply the labeled anomalies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyClassChoice {
    /// `k_l` classes drawn uniformly without replacement with the scenario seed.
    Random,
    Explicit(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub normal_class: i64,
    pub gamma_l: f64,
    pub gamma_p: f64,
    pub k_l: usize,
    pub anomaly_classes: AnomalyClassChoice,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(normal_class: i64, gamma_l: f64, gamma_p: f64, k_l: usize, seed: u64) -> Self {
        Self {
            normal_class,
            gamma_l,
            gamma_p,
            k_l,
            anomaly_classes: AnomalyClassChoice::Random,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("gamma_l", self.gamma_l), ("gamma_p", self.gamma_p)] {
            if !(0.0..1.0).contains(&g) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 1), got {g}"
                )));
            }
        }
        if let AnomalyClassChoice::Explicit(c) = &self.anomaly_classes {
            if c.len() != self.k_l {
                return Err(Error::invalid(format!(
                    "k_l = {} but {} anomaly classes listed",
                    self.k_l,
                    c.len()
                )));
            }
            if c.contains(&self.normal_class) {
                return Err(Error::invalid(
                    "the normal class cannot be a labeled anomaly class",
                ));
            }
        }
        Ok(())
    }
}

/// `m = round(γ_l·n / (1 − γ_l))`, so that `m / (n + m) ≈ γ_l`.
pub fn labeled_count(n: usize, gamma_l: f64) -> usize {
    (gamma_l * n as f64 / (1.0 - gamma_l)).round() as usize
}

/// Unlabeled rows plus labeled rows with known polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiSupervisedSplit {
    pub unlabeled: Matrix,
    pub labeled: Matrix,
    pub labeled_targets: Vec<Polarity>,
    /// True polarity of unlabeled rows, when known. Never used for training.
    pub unlabeled_truth: Option<Vec<Polarity>>,
    pub provenance: Option<ScenarioConfig>,
}

impl SemiSupervisedSplit {
    pub fn new(unlabeled: Matrix, labeled: Matrix, labeled_targets: Vec<Polarity>) -> Result<Self> {
        if labeled.rows() != labeled_targets.len() {
            return Err(Error::shape(format!(
                "{} labeled rows but {} targets",
                labeled.rows(),
                labeled_targets.len()
            )));
        }
        if !unlabeled.is_empty() && !labeled.is_empty() && unlabeled.cols() != labeled.cols() {
            return Err(Error::shape("unlabeled and labeled widths differ"));
        }
        if unlabeled.rows() + labeled.rows() == 0 {
            return Err(Error::invalid("split has no rows"));
        }
        Ok(Self {
            unlabeled,
            labeled,
            labeled_targets,
            unlabeled_truth: None,
            provenance: None,
        })
    }

    /// Purely unlabeled split.
    pub fn unsupervised(unlabeled: Matrix) -> Result<Self> {
        let d = unlabeled.cols();
        Self::new(unlabeled, Matrix::zeros(0, d), Vec::new())
    }

    pub fn n(&self) -> usize {
        self.unlabeled.rows()
    }

    pub fn m(&self) -> usize {
        self.labeled.rows()
    }

    pub fn dim(&self) -> usize {
        if self.unlabeled.rows() > 0 {
            self.unlabeled.cols()
        } else {
            self.labeled.cols()
        }
    }

    pub fn labeled_ratio(&self) -> f64 {
        self.m() as f64 / (self.n() + self.m()) as f64
    }

    /// Unlabeled rows followed by labeled rows, with per-row training labels.
    pub fn training_rows(&self) -> Result<(Matrix, Vec<SemiLabel>)> {
        let x = if self.labeled.rows() == 0 {
            self.unlabeled.clone()
        } else if self.unlabeled.rows() == 0 {
            self.labeled.clone()
        } else {
            self.unlabeled.vstack(&self.labeled)?
        };
        let mut labels = vec![SemiLabel::Unlabeled; self.n()];
        labels.extend(self.labeled_targets.iter().map(|&p| SemiLabel::from(p)));
        Ok((x, labels))
    }

    /// Rows allowed to define the center: unlabeled plus labeled normals.
    pub fn center_rows(&self) -> Matrix {
        let normals: Vec<usize> = (0..self.m())
            .filter(|&j| self.labeled_targets[j] == Polarity::Normal)
            .collect();
        if normals.is_empty() {
            return self.unlabeled.clone();
        }
        let ln = self.labeled.select_rows(&normals);
        if self.unlabeled.rows() == 0 {
            ln
        } else {
            self.unlabeled.vstack(&ln).expect("widths checked in new")
        }
    }
}

/// A generated scenario with the train-row provenance of every split row.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub split: SemiSupervisedSplit,
    pub test: Dataset,
    pub known_classes: Vec<i64>,
    pub unlabeled_source: Vec<usize>,
    pub labeled_source: Vec<usize>,
}

fn infeasible(msg: String) -> Error {
    Error::ScenarioInfeasible(msg)
}

fn sample_from<R: rand::Rng>(rng: &mut R, pool: &[usize], amount: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = index::sample(rng, pool.len(), amount)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Builds one cell of the class-based experimental grid from a train and a
/// test partition that both carry class labels.
///
/// Draw order under the scenario seed: labeled classes, labeled rows, dropped
/// normals, pollution rows.
pub fn make_scenario(train: &Dataset, test: &Dataset, cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let classes = train.require_class_labels()?;
    let test_classes = test.require_class_labels()?;
    if train.dim() != test.dim() {
        return Err(Error::shape("train and test widths differ"));
    }
    let normal_rows: Vec<usize> = (0..train.len())
        .filter(|&i| classes[i] == cfg.normal_class)
        .collect();
    if normal_rows.is_empty() {
        return Err(Error::invalid(format!(
            "normal class {} does not occur in the training data",
            cfg.normal_class
        )));
    }
    let anomaly_classes: Vec<i64> = classes
        .iter()
        .copied()
        .filter(|&c| c != cfg.normal_class)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = normal_rows.len();
    let m = labeled_count(n, cfg.gamma_l);
    let polluted = (cfg.gamma_p * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let known: Vec<i64> = match &cfg.anomaly_classes {
        AnomalyClassChoice::Explicit(c) => {
            for k in c {
                if !anomaly_classes.contains(k) {
                    return Err(infeasible(format!(
                        "anomaly class {k} has no training rows"
                    )));
                }
            }
            c.clone()
        }
        AnomalyClassChoice::Random => {
            if cfg.k_l > anomaly_classes.len() {
                return Err(infeasible(format!(
                    "k_l = {} exceeds the {} available anomaly classes",
                    cfg.k_l,
                    anomaly_classes.len()
                )));
            }
            let mut k: Vec<i64> = anomaly_classes
                .choose_multiple(&mut rng, cfg.k_l)
                .copied()
                .collect();
            k.sort_unstable();
            k
        }
    };
    if m > 0 && known.is_empty() {
        return Err(infeasible(format!(
            "{m} labeled anomalies requested but k_l = 0"
        )));
    }
    let known_pool: Vec<usize> = (0..train.len())
        .filter(|&i| known.contains(&classes[i]))
        .collect();
    if m > known_pool.len() {
        return Err(infeasible(format!(
            "need {m} labeled anomalies, known classes {known:?} have {}",
            known_pool.len()
        )));
    }
    let labeled_source = sample_from(&mut rng, &known_pool, m);

    let anomaly_pool: Vec<usize> = (0..train.len())
        .filter(|&i| classes[i] != cfg.normal_class && labeled_source.binary_search(&i).is_err())
        .collect();
    if polluted > anomaly_pool.len() {
        return Err(infeasible(format!(
            "need {polluted} pollution anomalies, {} remain in the pool",
            anomaly_pool.len()
        )));
    }
    let dropped = sample_from(&mut rng, &normal_rows, polluted);
    let pollution = sample_from(&mut rng, &anomaly_pool, polluted);
    let mut unlabeled_source: Vec<usize> = normal_rows
        .iter()
        .copied()
        .filter(|i| dropped.binary_search(i).is_err())
        .chain(pollution.iter().copied())
        .collect();
    unlabeled_source.sort_unstable();

    let truth = unlabeled_source
        .iter()
        .map(|&i| {
            if classes[i] == cfg.normal_class {
                Polarity::Normal
            } else {
                Polarity::Anomaly
            }
        })
        .collect();
    let mut split = SemiSupervisedSplit::new(
        train.features.select_rows(&unlabeled_source),
        train.features.select_rows(&labeled_source),
        vec![Polarity::Anomaly; m],
    )?;
    split.unlabeled_truth = Some(truth);
    split.provenance = Some(ScenarioConfig {
        anomaly_classes: AnomalyClassChoice::Explicit(known.clone()),
        k_l: known.len(),
        ..cfg.clone()
    });

    let test_labels = test_classes
        .iter()
        .map(|&c| {
            if c == cfg.normal_class {
                Polarity::Normal
            } else {
                Polarity::Anomaly
            }
        })
        .collect();
    let test = test.clone().with_anomaly_labels(test_labels)?;
    Ok(Scenario {
        split,
        test,
        known_classes: known,
        unlabeled_source,
        labeled_source,
    })
}

/// Stratified train/test partition plus the semi-supervised training split.
#[derive(Debug, Clone, PartialEq)]
pub struct OddsSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub split: SemiSupervisedSplit,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

pub const ODDS_TRAIN_FRACTION: f64 = 0.6;
pub const ODDS_GAMMA_L: f64 = 0.01;

/// Stratified split keeping `round(fraction·count)` rows of each polarity for
/// training. Returned index lists are ascending.
pub fn stratified_split(
    labels: &[Polarity],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for p in [Polarity::Normal, Polarity::Anomaly] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == p).collect();
        rows.shuffle(&mut rng);
        let k = (fraction * rows.len() as f64).round() as usize;
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Tabular benchmark protocol: stratified 60:40 split, unlabeled pool of all
/// training normals, `m = round(0.01·n/0.99)` labeled anomalies from the
/// training anomalies; the other training anomalies are dropped.
pub fn odds_split(data: &Dataset, seed: u64) -> Result<OddsSplit> {
    let labels = data.require_anomaly_labels()?;
    let anomalies = labels.iter().filter(|p| p.is_anomaly()).count();
    if anomalies == 0 || anomalies == labels.len() {
        return Err(Error::invalid(
            "both normal and anomalous rows are required",
        ));
    }
    let (train_indices, test_indices) = stratified_split(labels, ODDS_TRAIN_FRACTION, seed)?;
    let train = data.select(&train_indices);
    let test = data.select(&test_indices);
    let tl = train.require_anomaly_labels()?;
    let normals: Vec<usize> = (0..train.len()).filter(|&i| !tl[i].is_anomaly()).collect();
    let pool: Vec<usize> = (0..train.len()).filter(|&i| tl[i].is_anomaly()).collect();
    let m = labeled_count(normals.len(), ODDS_GAMMA_L);
    if m == 0 || m > pool.len() {
        return Err(infeasible(format!(
            "{} training normals call for {m} labeled anomalies, {} available",
            normals.len(),
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let labeled = sample_from(&mut rng, &pool, m);
    let mut split = SemiSupervisedSplit::new(
        train.features.select_rows(&normals),
        train.features.select_rows(&labeled),
        vec![Polarity::Anomaly; m],
    )?;
    split.unlabeled_truth = Some(vec![Polarity::Normal; normals.len()]);
    Ok(OddsSplit {
        train,
        test,
        split,
        train_indices,
        test_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class_data(counts: &[(i64, usize)]) -> Dataset {
        let classes: Vec<i64> = counts
            .iter()
            .flat_map(|&(c, k)| std::iter::repeat_n(c, k))
            .collect();
        let x = Matrix::from_vec(
            classes.len(),
            1,
            (0..classes.len()).map(|i| i as f64).collect(),
        )
        .unwrap();
        Dataset::new(x).with_class_labels(classes).unwrap()
    }

    #[test]
    fn labeled_ratio_example() {
        assert_eq!(labeled_count(950, 0.05), 50);
        let train = class_data(&[(0, 950), (1, 200), (2, 200)]);
        let test = class_data(&[(0, 5), (1, 5)]);
        let s = make_scenario(&train, &test, &ScenarioConfig::new(0, 0.05, 0.0, 1, 3)).unwrap();
        assert_eq!(s.split.m(), 50);
        assert_eq!(s.split.n(), 950);
        assert!((s.split.labeled_ratio() - 0.05).abs() < 1e-12);
        let t = s.test.anomaly_labels.unwrap();
        assert_eq!(t.iter().filter(|p| p.is_anomaly()).count(), 5);
    }

    #[test]
    fn unsupervised_cell() {
        let train = class_data(&[(0, 30), (1, 10)]);
        let s = make_scenario(&train, &train, &ScenarioConfig::new(0, 0.0, 0.0, 0, 1)).unwrap();
        assert_eq!(s.split.m(), 0);
        assert!(s
            .split
            .unlabeled_truth
            .unwrap()
            .iter()
            .all(|p| *p == Polarity::Normal));
    }

    #[test]
    fn pool_exhaustion_is_reported() {
        let train = class_data(&[(0, 100), (1, 2)]);
        let err =
            make_scenario(&train, &train, &ScenarioConfig::new(0, 0.1, 0.0, 1, 1)).unwrap_err();
        assert!(matches!(err, Error::ScenarioInfeasible(_)));
    }

    #[test]
    fn balanced_toy_odds_split() {
        let x = Matrix::from_vec(10, 1, (0..10).map(f64::from).collect()).unwrap();
        let labels = (0..10)
            .map(|i| {
                if i < 5 {
                    Polarity::Normal
                } else {
                    Polarity::Anomaly
                }
            })
            .collect();
        let d = Dataset::new(x).with_anomaly_labels(labels).unwrap();
        let (tr, te) = stratified_split(d.anomaly_labels.as_ref().unwrap(), 0.6, 0).unwrap();
        assert_eq!((tr.len(), te.len()), (6, 4));
        let an = |idx: &[usize]| idx.iter().filter(|&&i| i >= 5).count();
        assert_eq!((an(&tr), an(&te)), (3, 2));
        // 3 training normals call for round(0.0303) = 0 labeled anomalies.
        assert!(matches!(
            odds_split(&d, 0),
            Err(Error::ScenarioInfeasible(_))
        ));
    }
}
