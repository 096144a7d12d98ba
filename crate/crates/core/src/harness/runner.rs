use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::method::{run_method, Method, RunSettings};
use crate::data::{
    make_scenario, odds_split, AnomalyClassChoice, GridPoint, Scaler, ScalerKind, ScenarioConfig,
    SemiSupervisedSplit, ODDS_GAMMA_L,
};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate, auc_roc, wilcoxon_signed_rank, EvalRecord, GroupField, SummaryRow, WilcoxonResult,
};
use crate::labels::Polarity;
use crate::matrix::Matrix;
use crate::Dataset;

/// Fits the scaler on the split's training rows and applies it to both the
/// split and the test features.
pub fn scale_split(
    kind: ScalerKind,
    split: &SemiSupervisedSplit,
    test: &Matrix,
) -> Result<(SemiSupervisedSplit, Matrix)> {
    let (rows, _) = split.training_rows()?;
    let scaler = Scaler::fit(kind, &rows)?;
    let mut out = split.clone();
    out.unlabeled = scaler.transform(&split.unlabeled)?;
    out.labeled = if split.m() == 0 {
        split.labeled.clone()
    } else {
        scaler.transform(&split.labeled)?
    };
    Ok((out, scaler.transform(test)?))
}

fn explicit_classes(cfg: &ScenarioConfig) -> Option<Vec<i64>> {
    match &cfg.anomaly_classes {
        AnomalyClassChoice::Explicit(c) => Some(c.clone()),
        AnomalyClassChoice::Random => None,
    }
}

fn evaluate(
    method: &Method,
    settings: &RunSettings,
    dataset: &str,
    rep_dim: Option<usize>,
    split: &SemiSupervisedSplit,
    test: &Matrix,
    labels: &[Polarity],
    seed: u64,
) -> Result<f64> {
    let arch = settings.architecture(split.dim(), dataset, rep_dim)?;
    let scores = run_method(method, settings, &arch, split, test, seed)?;
    auc_roc(&scores, labels)
}

/// Train and test partitions of a class-labeled dataset.
pub type Partitions = (Dataset, Dataset);

fn run_point(
    point: &GridPoint,
    data: &std::result::Result<Arc<Partitions>, String>,
    settings: &RunSettings,
) -> EvalRecord {
    let start = Instant::now();
    let cfg = &point.scenario;
    let mut rec = EvalRecord {
        method: point.method.clone(),
        dataset: point.dataset.clone(),
        normal_class: Some(cfg.normal_class),
        gamma_l: cfg.gamma_l,
        gamma_p: cfg.gamma_p,
        k_l: cfg.k_l,
        anomaly_classes: explicit_classes(cfg),
        seed: cfg.seed,
        eta: point.eta,
        rep_dim: point.rep_dim,
        auc: None,
        skipped: None,
        wall_time: 0.0,
    };
    let outcome = (|| -> Result<f64> {
        let parts = data.as_ref().map_err(|e| Error::invalid(e.clone()))?;
        let mut method: Method = point.method.parse()?;
        if point.eta.is_some() {
            method.eta = point.eta;
        }
        let scenario = make_scenario(&parts.0, &parts.1, cfg)?;
        let kind = settings.preprocessing.unwrap_or(ScalerKind::MinMax);
        let (split, test) = scale_split(kind, &scenario.split, &scenario.test.features)?;
        let labels = scenario.test.require_anomaly_labels()?;
        evaluate(
            &method,
            settings,
            &point.dataset,
            point.rep_dim,
            &split,
            &test,
            labels,
            cfg.seed,
        )
    })();
    match outcome {
        Ok(auc) => rec.auc = Some(auc),
        Err(e) => rec.skipped = Some(e.to_string()),
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    rec
}

/// Key a grid point's record would carry; matches [`EvalRecord::key`].
pub fn point_key(p: &GridPoint) -> String {
    let cfg = &p.scenario;
    EvalRecord {
        method: p.method.clone(),
        dataset: p.dataset.clone(),
        normal_class: Some(cfg.normal_class),
        gamma_l: cfg.gamma_l,
        gamma_p: cfg.gamma_p,
        k_l: cfg.k_l,
        anomaly_classes: explicit_classes(cfg),
        seed: cfg.seed,
        eta: p.eta,
        rep_dim: p.rep_dim,
        auc: None,
        skipped: None,
        wall_time: 0.0,
    }
    .key()
}

/// Runs every grid point whose key is not in `done`, `workers` at a time.
/// Records are handed to `emit` in grid order, so an interrupted run leaves a
/// prefix that a rerun completes without duplicates. Cells that cannot run
/// (infeasible scenario, bad method, unreadable data) are emitted as skipped.
pub fn run_grid<L, E>(
    points: &[GridPoint],
    load: L,
    settings: &RunSettings,
    done: &HashSet<String>,
    workers: usize,
    mut emit: E,
) -> Result<usize>
where
    L: Fn(&str) -> Result<Partitions>,
    E: FnMut(&EvalRecord) -> Result<()>,
{
    let todo: Vec<&GridPoint> = points
        .iter()
        .filter(|p| !done.contains(&point_key(p)))
        .collect();
    let mut cache: BTreeMap<&str, std::result::Result<Arc<Partitions>, String>> = BTreeMap::new();
    for p in &todo {
        cache
            .entry(p.dataset.as_str())
            .or_insert_with(|| load(&p.dataset).map(Arc::new).map_err(|e| e.to_string()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidState(e.to_string()))?;
    for chunk in todo.chunks(workers.max(1)) {
        let records: Vec<EvalRecord> = pool.install(|| {
            chunk
                .par_iter()
                .map(|p| run_point(p, &cache[p.dataset.as_str()], settings))
                .collect()
        });
        for r in &records {
            emit(r)?;
        }
    }
    Ok(todo.len())
}

/// Wilcoxon comparison of two methods on one dataset, paired by seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTest {
    pub dataset: String,
    pub method_a: String,
    pub method_b: String,
    pub outcome: std::result::Result<WilcoxonResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OddsReport {
    pub records: Vec<EvalRecord>,
    pub summary: Vec<SummaryRow>,
    pub tests: Vec<PairwiseTest>,
    /// Datasets that failed as a whole, with the reason.
    pub failures: Vec<(String, String)>,
}

pub const ODDS_GROUPING: [GroupField; 2] = [GroupField::Dataset, GroupField::Method];

/// One dataset, one seed of the tabular benchmark: standardize with statistics
/// of the training partition, then score every method.
fn odds_seed(
    name: &str,
    data: &Dataset,
    methods: &[Method],
    settings: &RunSettings,
    seed: u64,
) -> Result<Vec<EvalRecord>> {
    let split = odds_split(data, seed)?;
    let kind = settings.preprocessing.unwrap_or(ScalerKind::Standardize);
    let scaler = Scaler::fit(kind, &split.train.features)?;
    let mut semi = split.split.clone();
    semi.unlabeled = scaler.transform(&semi.unlabeled)?;
    semi.labeled = scaler.transform(&semi.labeled)?;
    let test = scaler.transform(&split.test.features)?;
    let labels = split.test.require_anomaly_labels()?;
    methods
        .iter()
        .map(|m| {
            let start = Instant::now();
            let auc = evaluate(m, settings, name, None, &semi, &test, labels, seed)?;
            Ok(EvalRecord {
                method: m.to_string(),
                dataset: name.to_string(),
                normal_class: None,
                gamma_l: ODDS_GAMMA_L,
                gamma_p: 0.0,
                k_l: 1,
                anomaly_classes: None,
                seed,
                eta: None,
                rep_dim: None,
                auc: Some(auc),
                skipped: None,
                wall_time: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Tabular benchmark over named datasets. Seeds run in parallel; records come
/// back ordered by dataset, seed, method. A dataset that fails on any seed is
/// reported in `failures` and contributes no records.
pub fn benchmark_odds(
    datasets: &[(String, Dataset)],
    methods: &[Method],
    seeds: &[u64],
    settings: &RunSettings,
) -> Result<OddsReport> {
    if seeds.is_empty() {
        return Err(Error::invalid("seed list is empty"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("method list is empty"));
    }
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut tests = Vec::new();
    for (name, data) in datasets {
        let per_seed: Result<Vec<Vec<EvalRecord>>> = seeds
            .par_iter()
            .map(|&s| odds_seed(name, data, methods, settings, s))
            .collect();
        let recs: Vec<EvalRecord> = match per_seed {
            Ok(v) => v.into_iter().flatten().collect(),
            Err(e) => {
                failures.push((name.clone(), e.to_string()));
                continue;
            }
        };
        for (i, a) in methods.iter().enumerate() {
            for b in &methods[i + 1..] {
                let (a, b) = (a.to_string(), b.to_string());
                let auc_of = |m: &str| -> Vec<f64> {
                    recs.iter()
                        .filter(|r| r.method == m)
                        .filter_map(|r| r.auc)
                        .collect()
                };
                let outcome =
                    wilcoxon_signed_rank(&auc_of(&a), &auc_of(&b)).map_err(|e| e.to_string());
                tests.push(PairwiseTest {
                    dataset: name.clone(),
                    method_a: a,
                    method_b: b,
                    outcome,
                });
            }
        }
        records.extend(recs);
    }
    let summary = aggregate(&records, &ODDS_GROUPING);
    Ok(OddsReport {
        records,
        summary,
        tests,
        failures,
    })
}

/// Delimited table of the pairwise tests.
pub fn format_tests(tests: &[PairwiseTest]) -> String {
    let mut s = String::from("dataset,method_a,method_b,statistic,p_value,n\n");
    for t in tests {
        match &t.outcome {
            Ok(w) => s.push_str(&format!(
                "{},{},{},{},{:.6},{}\n",
                t.dataset, t.method_a, t.method_b, w.statistic, w.p_value, w.n
            )),
            Err(e) => s.push_str(&format!(
                "{},{},{},,,\"{}\"\n",
                t.dataset,
                t.method_a,
                t.method_b,
                e.replace('"', "'")
            )),
        }
    }
    s
}
