use std::fmt;
use std::str::FromStr;

use crate::baselines::{hybrid_apply, iforest_fit, kde_fit, IForestConfig, ShallowSpec};
use crate::data::{ScalerKind, SemiSupervisedSplit};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model_file::StoredModel;
use crate::models::{
    pretrain_autoencoder, train, Autoencoder, EpochLoss, TrainMode, TrainingConfig,
    DEFAULT_INVERSE_EPS,
};
use crate::nn::Architecture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    DeepSad,
    OneClass,
    SoftBoundary,
    Supervised,
    Autoencoder,
    Kde,
    IForest,
    HybridKde,
    HybridIForest,
}

impl MethodKind {
    pub const ALL: [MethodKind; 9] = [
        MethodKind::DeepSad,
        MethodKind::OneClass,
        MethodKind::SoftBoundary,
        MethodKind::Supervised,
        MethodKind::Autoencoder,
        MethodKind::Kde,
        MethodKind::IForest,
        MethodKind::HybridKde,
        MethodKind::HybridIForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::DeepSad => "deep-sad",
            MethodKind::OneClass => "one-class",
            MethodKind::SoftBoundary => "soft-boundary",
            MethodKind::Supervised => "supervised",
            MethodKind::Autoencoder => "ae",
            MethodKind::Kde => "kde",
            MethodKind::IForest => "iforest",
            MethodKind::HybridKde => "hybrid-kde",
            MethodKind::HybridIForest => "hybrid-iforest",
        }
    }

    fn uses_autoencoder(self) -> bool {
        matches!(
            self,
            MethodKind::Autoencoder | MethodKind::HybridKde | MethodKind::HybridIForest
        )
    }
}

/// A method id with optional hyperparameter overrides, written
/// `name[:key=value[,key=value]]`, e.g. `soft-boundary:nu=0.01`.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub kind: MethodKind,
    pub eta: Option<f64>,
    pub nu: Option<f64>,
}

impl Method {
    pub fn new(kind: MethodKind) -> Self {
        Self {
            kind,
            eta: None,
            nu: None,
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p)),
            None => (s.trim(), None),
        };
        let kind = MethodKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| {
                let known: Vec<&str> = MethodKind::ALL.iter().map(|k| k.name()).collect();
                Error::invalid(format!(
                    "unknown method `{name}` (known: {})",
                    known.join(", ")
                ))
            })?;
        let mut m = Method::new(kind);
        for kv in params.into_iter().flat_map(|p| p.split(';')) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected key=value in `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("`{v}` is not a number")))?;
            match (k.trim(), kind) {
                ("eta", MethodKind::DeepSad) => m.eta = Some(v),
                ("nu", MethodKind::SoftBoundary) => m.nu = Some(v),
                (k, _) => {
                    return Err(Error::invalid(format!(
                        "`{k}` is not a parameter of {name}"
                    )));
                }
            }
        }
        Ok(m)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        if let Some(e) = self.eta {
            write!(f, ":eta={e}")?;
        }
        if let Some(n) = self.nu {
            write!(f, ":nu={n}")?;
        }
        Ok(())
    }
}

/// Everything a method run needs besides data and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    /// Hidden and representation widths, e.g. `32-16-8`. `None` picks a
    /// per-dataset default.
    pub widths: Option<String>,
    pub batch_norm: bool,
    pub train: TrainingConfig,
    pub pretrain: TrainingConfig,
    /// Initialize hypersphere networks from a pre-trained encoder.
    pub use_pretraining: bool,
    pub eta: f64,
    pub inverse_eps: f64,
    pub nu: f64,
    pub iforest_trees: usize,
    pub iforest_subsample: usize,
    pub kde_grid: Vec<f64>,
    pub kde_folds: usize,
    /// Preprocessing override; scenarios default to min-max, tabular
    /// benchmarks to standardization.
    pub preprocessing: Option<ScalerKind>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self::full()
    }
}

impl RunSettings {
    /// Published schedule and hyperparameters.
    pub fn full() -> Self {
        Self {
            widths: None,
            batch_norm: true,
            train: TrainingConfig::default(),
            pretrain: TrainingConfig::default(),
            use_pretraining: true,
            eta: 1.0,
            inverse_eps: DEFAULT_INVERSE_EPS,
            nu: 0.1,
            iforest_trees: 100,
            iforest_subsample: 256,
            kde_grid: crate::baselines::default_bandwidth_grid(),
            kde_folds: crate::baselines::DEFAULT_FOLDS,
            preprocessing: None,
        }
    }

    /// Shorter schedule (20 + 40 epochs) for quick runs.
    pub fn desk() -> Self {
        let mut s = Self::full();
        s.train.search_epochs = 20;
        s.train.finetune_epochs = 40;
        s.pretrain.search_epochs = 20;
        s.pretrain.finetune_epochs = 40;
        s
    }

    pub fn architecture(
        &self,
        input_dim: usize,
        dataset: &str,
        rep_dim: Option<usize>,
    ) -> Result<Architecture> {
        let widths = self
            .widths
            .clone()
            .unwrap_or_else(|| default_widths(dataset).to_string());
        let mut arch = Architecture::parse_widths(input_dim, &widths, self.batch_norm)?;
        if let Some(d) = rep_dim {
            let mut parts: Vec<&str> = widths.split('-').collect();
            let ds = d.to_string();
            *parts.last_mut().expect("parse_widths rejects empty lists") = &ds;
            arch = Architecture::parse_widths(input_dim, &parts.join("-"), self.batch_norm)?;
        }
        Ok(arch)
    }

    fn with_seed(cfg: &TrainingConfig, seed: u64) -> TrainingConfig {
        TrainingConfig {
            seed,
            ..cfg.clone()
        }
    }
}

/// Network widths per benchmark dataset; other data gets `32-16-8`.
pub fn default_widths(dataset: &str) -> &'static str {
    let stem = std::path::Path::new(dataset)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(dataset)
        .to_ascii_lowercase();
    match stem.as_str() {
        "thyroid" => "32-16-4",
        "arrhythmia" => "128-64-32",
        _ => "32-16-8",
    }
}

impl Method {
    /// Hypersphere or classifier objective, `None` for the other methods.
    pub fn train_mode(&self, settings: &RunSettings) -> Option<TrainMode> {
        match self.kind {
            MethodKind::DeepSad => Some(TrainMode::DeepSad {
                eta: self.eta.unwrap_or(settings.eta),
                inverse_eps: settings.inverse_eps,
            }),
            MethodKind::OneClass => Some(TrainMode::OneClass),
            MethodKind::SoftBoundary => Some(TrainMode::SoftBoundary {
                nu: self.nu.unwrap_or(settings.nu),
            }),
            MethodKind::Supervised => Some(TrainMode::SupervisedBce),
            _ => None,
        }
    }
}

/// Fits a method that yields a single storable model. Hypersphere methods
/// start from `pretrained` when given, otherwise pre-train first if the
/// settings ask for it. Hybrids are evaluation-only and rejected.
pub fn fit_model(
    method: &Method,
    settings: &RunSettings,
    arch: &Architecture,
    split: &SemiSupervisedSplit,
    pretrained: Option<&Autoencoder>,
    seed: u64,
) -> Result<(StoredModel, Vec<EpochLoss>)> {
    let train_cfg = RunSettings::with_seed(&settings.train, seed);
    let ae_cfg = RunSettings::with_seed(&settings.pretrain, seed);
    let (all_rows, _) = split.training_rows()?;
    match method.kind {
        MethodKind::Supervised => {
            let out = train(split, arch, &train_cfg, TrainMode::SupervisedBce, None)?;
            Ok((out.model.into(), out.log))
        }
        MethodKind::DeepSad | MethodKind::OneClass | MethodKind::SoftBoundary => {
            let mode = method
                .train_mode(settings)
                .expect("hypersphere kinds have a mode");
            let own;
            let ae = match pretrained {
                Some(a) => Some(a),
                None if settings.use_pretraining => {
                    own = pretrain_autoencoder(&all_rows, arch, &ae_cfg)?.0;
                    Some(&own)
                }
                None => None,
            };
            let out = train(split, arch, &train_cfg, mode, ae)?;
            Ok((out.model.into(), out.log))
        }
        MethodKind::Autoencoder => {
            let (ae, log) = pretrain_autoencoder(&all_rows, arch, &ae_cfg)?;
            Ok((StoredModel::Autoencoder(ae), log))
        }
        MethodKind::Kde => Ok((
            StoredModel::Kde(kde_fit(
                &all_rows,
                &settings.kde_grid,
                settings.kde_folds,
                seed,
            )?),
            Vec::new(),
        )),
        MethodKind::IForest => {
            let cfg = IForestConfig {
                trees: settings.iforest_trees,
                subsample: settings.iforest_subsample,
                seed,
            };
            Ok((
                StoredModel::IForest(iforest_fit(&all_rows, &cfg)?),
                Vec::new(),
            ))
        }
        MethodKind::HybridKde | MethodKind::HybridIForest => Err(Error::invalid(format!(
            "{} has no single model file; evaluate it through a scenario or benchmark run",
            method.kind.name()
        ))),
    }
}

/// Trains `method` on `split` and scores `test` (higher = more anomalous).
pub fn run_method(
    method: &Method,
    settings: &RunSettings,
    arch: &Architecture,
    split: &SemiSupervisedSplit,
    test: &Matrix,
    seed: u64,
) -> Result<Vec<f64>> {
    let train_cfg = RunSettings::with_seed(&settings.train, seed);
    let ae_cfg = RunSettings::with_seed(&settings.pretrain, seed);
    let (all_rows, _) = split.training_rows()?;
    let pretrain =
        |_: ()| -> Result<Autoencoder> { Ok(pretrain_autoencoder(&all_rows, arch, &ae_cfg)?.0) };
    let kde = ShallowSpec::Kde {
        grid: settings.kde_grid.clone(),
        folds: settings.kde_folds,
        seed,
    };
    let forest = ShallowSpec::IForest(IForestConfig {
        trees: settings.iforest_trees,
        subsample: settings.iforest_subsample,
        seed,
    });
    let hypersphere = |mode: Option<TrainMode>| -> Result<Vec<f64>> {
        let mode = mode.expect("hypersphere kinds have a mode");
        let ae = if settings.use_pretraining {
            Some(pretrain(())?)
        } else {
            None
        };
        train(split, arch, &train_cfg, mode, ae.as_ref())?
            .model
            .score(test)
    };
    match method.kind {
        MethodKind::DeepSad | MethodKind::OneClass | MethodKind::SoftBoundary => {
            hypersphere(method.train_mode(settings))
        }
        MethodKind::Supervised => train(split, arch, &train_cfg, TrainMode::SupervisedBce, None)?
            .model
            .score(test),
        k if k.uses_autoencoder() => {
            let ae = pretrain(())?;
            match k {
                MethodKind::Autoencoder => ae.reconstruction_errors(test),
                MethodKind::HybridKde => hybrid_apply(&ae, &kde, &all_rows, test),
                _ => hybrid_apply(&ae, &forest, &all_rows, test),
            }
        }
        MethodKind::Kde => kde.fit_score(&all_rows, test),
        MethodKind::IForest => forest.fit_score(&all_rows, test),
        _ => unreachable!("all kinds covered"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let m: Method = "soft-boundary:nu=0.01".parse().unwrap();
        assert_eq!(m.kind, MethodKind::SoftBoundary);
        assert_eq!(m.nu, Some(0.01));
        assert_eq!(m.to_string(), "soft-boundary:nu=0.01");
        assert!("deep-sad:nu=1".parse::<Method>().is_err());
        assert!("svm".parse::<Method>().is_err());
        for k in MethodKind::ALL {
            assert_eq!(k.name().parse::<Method>().unwrap().kind, k);
        }
    }

    #[test]
    fn dataset_widths() {
        assert_eq!(default_widths("data/odds/thyroid.csv"), "32-16-4");
        assert_eq!(default_widths("cardio"), "32-16-8");
        let s = RunSettings::full();
        let a = s.architecture(6, "thyroid", Some(2)).unwrap();
        assert_eq!(a.output_dim().unwrap(), 2);
    }
}
