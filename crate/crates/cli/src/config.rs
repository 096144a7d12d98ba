//! Run configuration files.
//!
//! ```text
//! # overrides on top of the chosen preset
//! preset = desk
//!
//! [network]
//! widths = 32-16-8
//! batch_norm = true
//!
//! [train]
//! search_epochs = 50
//! search_lr = 1e-4
//! finetune_epochs = 100
//! finetune_lr = 1e-5
//! batch_size = 200
//! weight_decay = 1e-6
//! clip_grad_norm = 5
//!
//! [pretrain]          # same keys as [train], plus
//! enabled = true
//!
//! [deep-sad]
//! eta = 1
//! inverse_eps = 1e-6
//!
//! [soft-boundary]
//! nu = 0.1
//!
//! [iforest]
//! trees = 100
//! subsample = 256
//!
//! [kde]
//! bandwidths = 1, 2, 4
//! folds = 5
//!
//! [data]
//! preprocessing = standardize
//! ```

use std::str::FromStr;

use deepsad_core::data::ScalerKind;
use deepsad_core::harness::RunSettings;
use deepsad_core::TrainingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Full,
    Desk,
}

impl Preset {
    pub fn settings(self) -> RunSettings {
        match self {
            Preset::Full => RunSettings::full(),
            Preset::Desk => RunSettings::desk(),
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            _ => Err(format!("unknown preset `{s}` (full, desk)")),
        }
    }
}

/// One `key = value` line with its section and line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub section: String,
    pub key: String,
    pub value: String,
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>, String> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            section = name
                .strip_suffix(']')
                .ok_or_else(|| format!("line {}: unterminated section header", i + 1))?
                .trim()
                .to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        out.push(Entry {
            line: i + 1,
            section: section.clone(),
            key: k.trim().to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

fn parse<T: FromStr>(e: &Entry) -> Result<T, String> {
    e.value.parse().map_err(|_| {
        format!(
            "line {}: `{}` is not a valid value for {}",
            e.line, e.value, e.key
        )
    })
}

fn apply_training(cfg: &mut TrainingConfig, e: &Entry) -> Result<bool, String> {
    match e.key.as_str() {
        "search_epochs" => cfg.search_epochs = parse(e)?,
        "search_lr" => cfg.search_lr = parse(e)?,
        "finetune_epochs" => cfg.finetune_epochs = parse(e)?,
        "finetune_lr" => cfg.finetune_lr = parse(e)?,
        "epochs" => *cfg = cfg.clone().with_total_epochs(parse(e)?),
        "batch_size" => cfg.batch_size = parse(e)?,
        "weight_decay" => cfg.weight_decay = parse(e)?,
        "shuffle" => cfg.shuffle = parse(e)?,
        "clip_grad_norm" => {
            cfg.clip_grad_norm = if e.value.is_empty() || e.value == "none" {
                None
            } else {
                Some(parse(e)?)
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

/// Preset named by a top-level `preset = …` line, if any.
pub fn preset_of(entries: &[Entry]) -> Result<Option<Preset>, String> {
    entries
        .iter()
        .find(|e| e.section.is_empty() && e.key == "preset")
        .map(|e| e.value.parse().map_err(|m| format!("line {}: {m}", e.line)))
        .transpose()
}

/// Applies config entries on top of `s`. Unknown sections or keys are errors.
pub fn apply(s: &mut RunSettings, entries: &[Entry]) -> Result<(), String> {
    for e in entries {
        let known = match (e.section.as_str(), e.key.as_str()) {
            ("", "preset") => true,
            ("network", "widths") => {
                s.widths = Some(e.value.clone());
                true
            }
            ("network", "batch_norm") => {
                s.batch_norm = parse(e)?;
                true
            }
            ("train", _) => apply_training(&mut s.train, e)?,
            ("pretrain", "enabled") => {
                s.use_pretraining = parse(e)?;
                true
            }
            ("pretrain", _) => apply_training(&mut s.pretrain, e)?,
            ("deep-sad", "eta") => {
                s.eta = parse(e)?;
                true
            }
            ("deep-sad", "inverse_eps") => {
                s.inverse_eps = parse(e)?;
                true
            }
            ("soft-boundary", "nu") => {
                s.nu = parse(e)?;
                true
            }
            ("iforest", "trees") => {
                s.iforest_trees = parse(e)?;
                true
            }
            ("iforest", "subsample") => {
                s.iforest_subsample = parse(e)?;
                true
            }
            ("kde", "bandwidths") => {
                s.kde_grid = e
                    .value
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse()
                            .map_err(|_| format!("line {}: bad bandwidth `{v}`", e.line))
                    })
                    .collect::<Result<_, _>>()?;
                true
            }
            ("kde", "folds") => {
                s.kde_folds = parse(e)?;
                true
            }
            ("data", "preprocessing") => {
                s.preprocessing = match e.value.as_str() {
                    "none" => None,
                    v => Some(
                        v.parse::<ScalerKind>()
                            .map_err(|err| format!("line {}: {err}", e.line))?,
                    ),
                };
                true
            }
            _ => false,
        };
        if !known {
            return Err(format!(
                "line {}: unknown setting `{}` in section [{}]",
                e.line, e.key, e.section
            ));
        }
    }
    Ok(())
}
