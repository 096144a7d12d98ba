use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use deepsad_core::data::{load_csv, parse_grid, Scaler, ScalerKind};
use deepsad_core::eval::{
    aggregate, auc_roc, format_summary, read_records, EvalRecord, GroupField,
};
use deepsad_core::harness::{
    benchmark_odds as run_benchmark, demo_toy as toy_grid, fit_model, format_tests, run_grid,
    Method, MethodKind, RunSettings, ODDS_GROUPING,
};
use deepsad_core::model_file::{ModelFile, StoredModel};
use deepsad_core::models::format_loss_log;
use deepsad_core::nn::LayerSpec;
use deepsad_core::{Dataset, SemiSupervisedSplit};
use serde_json::{json, Map, Value};

use crate::config::{self, Preset};
use crate::{
    OddsArgs, PretrainArgs, ReportArgs, ScenarioArgs, ScoreArgs, SettingsArgs, ToyArgs, TrainArgs,
};

/// Usage errors exit with 2, runtime and numeric failures with 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<deepsad_core::Error> for CliError {
    fn from(e: deepsad_core::Error) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    usage(format!("{}: {e}", path.display()))
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("file not found: {}", path.display())))
    }
}

fn load(path: &Path) -> Result<Dataset> {
    require_file(path)?;
    load_csv(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

impl SettingsArgs {
    pub fn resolve(&self) -> Result<RunSettings> {
        let entries = match &self.config {
            Some(p) => {
                require_file(p)?;
                let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
                config::parse_entries(&text).map_err(|m| usage(format!("{}: {m}", p.display())))?
            }
            None => Vec::new(),
        };
        let preset = match self.preset {
            Some(p) => p,
            None => config::preset_of(&entries)
                .map_err(usage)?
                .unwrap_or(Preset::Full),
        };
        let mut s = preset.settings();
        config::apply(&mut s, &entries).map_err(usage)?;
        if let Some(w) = &self.widths {
            s.widths = Some(w.clone());
        }
        if self.no_batch_norm {
            s.batch_norm = false;
        }
        if let Some(e) = self.epochs {
            s.train = s.train.clone().with_total_epochs(e);
            s.pretrain = s.pretrain.clone().with_total_epochs(e);
        }
        if let Some(e) = self.pretrain_epochs {
            s.pretrain = s.pretrain.clone().with_total_epochs(e);
        }
        let t = &mut s.train;
        if let Some(v) = self.search_epochs {
            t.search_epochs = v;
        }
        if let Some(v) = self.finetune_epochs {
            t.finetune_epochs = v;
        }
        if let Some(v) = self.search_lr {
            t.search_lr = v;
        }
        if let Some(v) = self.finetune_lr {
            t.finetune_lr = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
            s.pretrain.batch_size = v;
        }
        if let Some(v) = self.weight_decay {
            s.train.weight_decay = v;
        }
        if let Some(v) = self.clip_grad_norm {
            s.train.clip_grad_norm = Some(v);
        }
        if self.no_pretraining {
            s.use_pretraining = false;
        }
        if let Some(v) = self.eta {
            s.eta = v;
        }
        if let Some(v) = self.nu {
            s.nu = v;
        }
        if let Some(v) = self.inverse_eps {
            s.inverse_eps = v;
        }
        if let Some(p) = &self.preprocessing {
            s.preprocessing = match p.as_str() {
                "none" => None,
                v => Some(v.parse::<ScalerKind>().map_err(|e| usage(e.to_string()))?),
            };
        }
        if let Some(v) = self.iforest_trees {
            s.iforest_trees = v;
        }
        if let Some(v) = self.iforest_subsample {
            s.iforest_subsample = v;
        }
        if let Some(v) = self.kde_folds {
            s.kde_folds = v;
        }
        s.train.validate()?;
        s.pretrain.validate()?;
        Ok(s)
    }
}

/// Configuration echo stored in model-file metadata.
fn settings_json(s: &RunSettings, arch_widths: &str) -> Value {
    json!({
        "widths": arch_widths,
        "batch_norm": s.batch_norm,
        "train": serde_json::to_value(&s.train).unwrap_or(Value::Null),
        "pretrain": serde_json::to_value(&s.pretrain).unwrap_or(Value::Null),
        "use_pretraining": s.use_pretraining,
        "eta": s.eta,
        "lambda": s.train.weight_decay,
        "inverse_eps": s.inverse_eps,
        "nu": s.nu,
        "preprocessing": s.preprocessing.map(|k| format!("{k:?}").to_lowercase()),
        "iforest": { "trees": s.iforest_trees, "subsample": s.iforest_subsample },
        "kde": { "bandwidths": s.kde_grid, "folds": s.kde_folds },
    })
}

fn widths_of(arch: &deepsad_core::Architecture) -> String {
    arch.layers
        .iter()
        .filter_map(|l| match l {
            LayerSpec::Dense { fan_out, .. } => Some(fan_out.to_string()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("-")
}

/// Unlabeled rows from `data` and labeled rows from `labeled`.
fn training_split(data: &Path, labeled: Option<&Path>) -> Result<SemiSupervisedSplit> {
    let u = load(data)?;
    match labeled {
        None => Ok(SemiSupervisedSplit::unsupervised(u.features)?),
        Some(p) => {
            let l = load(p)?;
            let targets = l.anomaly_labels.clone().ok_or_else(|| {
                usage(format!(
                    "{}: labeled rows need a `label` column",
                    p.display()
                ))
            })?;
            Ok(SemiSupervisedSplit::new(u.features, l.features, targets)?)
        }
    }
}

fn scale_training(split: &mut SemiSupervisedSplit, scaler: &Scaler) -> Result<()> {
    split.unlabeled = scaler.transform(&split.unlabeled)?;
    if split.m() > 0 {
        split.labeled = scaler.transform(&split.labeled)?;
    }
    Ok(())
}

fn fit_scaler(s: &RunSettings, split: &SemiSupervisedSplit) -> Result<Option<Scaler>> {
    match s.preprocessing {
        None => Ok(None),
        Some(kind) => Ok(Some(Scaler::fit(kind, &split.training_rows()?.0)?)),
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("data")
        .to_string()
}

pub fn pretrain(a: PretrainArgs) -> Result<()> {
    let s = a.settings.resolve()?;
    let mut split = training_split(&a.data, a.labeled.as_deref())?;
    let scaler = fit_scaler(&s, &split)?;
    if let Some(sc) = &scaler {
        scale_training(&mut split, sc)?;
    }
    let arch = s.architecture(split.dim(), &dataset_name(&a.data), None)?;
    let (model, log) = fit_model(
        &Method::new(MethodKind::Autoencoder),
        &s,
        &arch,
        &split,
        None,
        a.seed,
    )?;
    print!("{}", format_loss_log(&log));
    let mut file = ModelFile::new(model);
    file.scaler = scaler;
    file.metadata = metadata("pretrain", "ae", &a.data, a.seed, &s, &arch);
    file.save(&a.out)?;
    Ok(())
}

fn metadata(
    command: &str,
    method: &str,
    data: &Path,
    seed: u64,
    s: &RunSettings,
    arch: &deepsad_core::Architecture,
) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("method".into(), json!(method));
    m.insert("data".into(), json!(data.display().to_string()));
    m.insert("seed".into(), json!(seed));
    m.insert("config".into(), settings_json(s, &widths_of(arch)));
    m
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut s = a.settings.resolve()?;
    let method: Method = a.method.parse()?;
    let mut split = training_split(&a.data, a.labeled.as_deref())?;
    let pretrained = match &a.pretrained {
        Some(p) => {
            require_file(p)?;
            let f = ModelFile::load(p)?;
            match f.model {
                StoredModel::Autoencoder(ae) => Some((ae, f.scaler)),
                other => {
                    return Err(usage(format!(
                        "{} holds a {} model, not an autoencoder",
                        p.display(),
                        other.kind_name()
                    )))
                }
            }
        }
        None => None,
    };
    let scaler = match &pretrained {
        Some((_, sc)) => sc.clone(),
        None => fit_scaler(&s, &split)?,
    };
    if let Some(sc) = &scaler {
        scale_training(&mut split, sc)?;
    }
    let arch = match (&pretrained, &s.widths) {
        (Some((ae, _)), None) if a.rep_dim.is_none() => ae.encoder.architecture(),
        _ => s.architecture(split.dim(), &dataset_name(&a.data), a.rep_dim)?,
    };
    if pretrained.is_some() {
        s.use_pretraining = false;
    }
    let (model, log) = fit_model(
        &method,
        &s,
        &arch,
        &split,
        pretrained.as_ref().map(|(ae, _)| ae),
        a.seed,
    )?;
    if !log.is_empty() {
        print!("{}", format_loss_log(&log));
    }
    let mut file = ModelFile::new(model);
    file.scaler = scaler;
    file.metadata = metadata("train", &method.to_string(), &a.data, a.seed, &s, &arch);
    if let Some(p) = &a.pretrained {
        file.metadata
            .insert("pretrained".into(), json!(p.display().to_string()));
    }
    file.save(&a.out)?;
    Ok(())
}

pub fn score(a: ScoreArgs) -> Result<()> {
    require_file(&a.model)?;
    let model = ModelFile::load(&a.model)?;
    let data = load(&a.data)?;
    let scores = model.score_raw(&data.features)?;
    let mut out = String::from("score\n");
    for v in &scores {
        out.push_str(&format!("{v}\n"));
    }
    if let Some(labels) = &data.anomaly_labels {
        match auc_roc(&scores, labels) {
            Ok(auc) => out.push_str(&format!("auc,{auc}\n")),
            Err(e) => eprintln!("warning: {e}"),
        }
    }
    write_output(a.out.as_deref(), &out)
}

fn parse_group_by(spec: &str) -> Result<Vec<GroupField>> {
    spec.split(',')
        .map(|g| g.trim().parse::<GroupField>().map_err(CliError::from))
        .collect()
}

/// Drops a torn final line so appended records start on a fresh line.
fn repair_tail(path: &Path) -> Result<Vec<EvalRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        fs::write(path, &text[..keep]).map_err(|e| io_err(path, e))?;
    }
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(read_records(BufReader::new(f))?)
}

pub fn scenario(a: ScenarioArgs) -> Result<()> {
    let s = a.settings.resolve()?;
    let group_by = parse_group_by(&a.group_by)?;
    require_file(&a.grid)?;
    let text = fs::read_to_string(&a.grid).map_err(|e| io_err(&a.grid, e))?;
    let cells = parse_grid(&text)?;
    let points: Vec<_> = cells.iter().flat_map(|c| c.expand()).collect();
    for p in &points {
        p.method.parse::<Method>()?;
    }
    let base: PathBuf = a.grid.parent().map(Path::to_path_buf).unwrap_or_default();
    let existing = repair_tail(&a.out)?;
    let done: HashSet<String> = existing.iter().map(EvalRecord::key).collect();
    let mut out = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&a.out)
        .map_err(|e| io_err(&a.out, e))?;
    let mut all = existing;
    let loader = |name: &str| -> deepsad_core::Result<(Dataset, Dataset)> {
        let train = base.join(format!("{name}_train.csv"));
        let test = base.join(format!("{name}_test.csv"));
        Ok((load_csv(&train)?, load_csv(&test)?))
    };
    let ran = run_grid(&points, loader, &s, &done, a.workers, |r| {
        writeln!(out, "{}", r.to_json_line()?)?;
        out.flush()?;
        if let Some(reason) = &r.skipped {
            eprintln!("skipped {}: {reason}", r.key());
        }
        all.push(r.clone());
        Ok(())
    })?;
    eprintln!("{ran} cells run, {} already recorded", points.len() - ran);
    print!("{}", format_summary(&aggregate(&all, &group_by), &group_by));
    Ok(())
}

/// `0-9`, `1,3,5`, `0-2,7`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || usage(format!("bad seed list entry `{part}`"));
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
                if hi < lo {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

pub fn benchmark_odds(a: OddsArgs) -> Result<()> {
    let s = a.settings.resolve()?;
    let seeds = parse_seeds(&a.seeds)?;
    if seeds.is_empty() {
        return Err(usage("seed list is empty"));
    }
    let methods: Vec<Method> = a
        .methods
        .split(',')
        .map(|m| m.trim().parse::<Method>())
        .collect::<deepsad_core::Result<_>>()?;
    let mut datasets = Vec::new();
    for p in &a.data {
        let d = load(p)?;
        if d.anomaly_labels.is_none() {
            return Err(usage(format!("{}: needs a `label` column", p.display())));
        }
        datasets.push((dataset_name(p), d));
    }
    let report = run_benchmark(&datasets, &methods, &seeds, &s)?;
    for (name, reason) in &report.failures {
        eprintln!("dataset {name} failed: {reason}");
    }
    if let Some(p) = &a.out {
        let mut text = String::new();
        for r in &report.records {
            text.push_str(&r.to_json_line()?);
            text.push('\n');
        }
        fs::write(p, text).map_err(|e| io_err(p, e))?;
    }
    let mut table = format_summary(&report.summary, &ODDS_GROUPING);
    if !report.tests.is_empty() {
        table.push('\n');
        table.push_str(&format_tests(&report.tests));
    }
    print!("{table}");
    if let Some(p) = &a.summary {
        fs::write(p, &table).map_err(|e| io_err(p, e))?;
    }
    if report.failures.len() == datasets.len() {
        return Err(CliError::Runtime("every dataset failed".into()));
    }
    Ok(())
}

pub fn demo_toy(a: ToyArgs) -> Result<()> {
    let text = toy_grid(a.seed, a.resolution)?;
    write_output(a.out.as_deref(), &text)
}

pub fn report(a: ReportArgs) -> Result<()> {
    let group_by = parse_group_by(&a.group_by)?;
    require_file(&a.records)?;
    let f = File::open(&a.records).map_err(|e| io_err(&a.records, e))?;
    let records = read_records(BufReader::new(f))?;
    if records.is_empty() {
        return Err(usage(format!("{}: no records", a.records.display())));
    }
    write_output(
        a.out.as_deref(),
        &format_summary(&aggregate(&records, &group_by), &group_by),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0-3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seeds("5, 1-2").unwrap(), vec![5, 1, 2]);
        assert!(parse_seeds("").unwrap().is_empty());
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
