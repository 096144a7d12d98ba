use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One experiment outcome; serialized as a single JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub method: String,
    pub dataset: String,
    pub normal_class: Option<i64>,
    pub gamma_l: f64,
    pub gamma_p: f64,
    pub k_l: usize,
    /// Labeled anomaly classes when fixed by the grid instead of drawn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomaly_classes: Option<Vec<i64>>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep_dim: Option<usize>,
    /// Missing when the cell was skipped.
    pub auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub wall_time: f64,
}

impl EvalRecord {
    /// Identity of the run, independent of its outcome. Used to resume grids.
    pub fn key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.method,
            self.dataset,
            self.normal_class
                .map_or_else(|| "-".into(), |c| c.to_string()),
            self.gamma_l,
            self.gamma_p,
            self.k_l,
            self.anomaly_classes.as_ref().map_or_else(
                || "-".into(),
                |c| c.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
            ),
            self.eta.map_or_else(|| "-".into(), |v| v.to_string()),
            self.rep_dim.map_or_else(|| "-".into(), |v| v.to_string()),
            self.seed
        )
    }

    pub fn to_json_line(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// The JSON line with `wall_time` zeroed, for reproducibility checks.
    pub fn to_json_line_without_time(&self) -> Result<String> {
        Self {
            wall_time: 0.0,
            ..self.clone()
        }
        .to_json_line()
    }
}

pub fn write_records<W: Write>(w: &mut W, records: &[EvalRecord]) -> Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_json_line()?)?;
    }
    Ok(())
}

/// Reads JSON-line records. A torn final line (interrupted write) is ignored.
pub fn read_records<R: BufRead>(r: R) -> Result<Vec<EvalRecord>> {
    let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::new();
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(rec) => out.push(rec),
            Err(_) if i == last => break,
            Err(e) => return Err(Error::Format(format!("record line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupField {
    Method,
    Dataset,
    NormalClass,
    GammaL,
    GammaP,
    KL,
    Seed,
    Eta,
    RepDim,
}

impl FromStr for GroupField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "method" => GroupField::Method,
            "dataset" => GroupField::Dataset,
            "normal_class" => GroupField::NormalClass,
            "gamma_l" => GroupField::GammaL,
            "gamma_p" => GroupField::GammaP,
            "k_l" => GroupField::KL,
            "seed" => GroupField::Seed,
            "eta" => GroupField::Eta,
            "rep_dim" => GroupField::RepDim,
            _ => return Err(Error::invalid(format!("unknown group field `{s}`"))),
        })
    }
}

impl GroupField {
    pub fn name(self) -> &'static str {
        match self {
            GroupField::Method => "method",
            GroupField::Dataset => "dataset",
            GroupField::NormalClass => "normal_class",
            GroupField::GammaL => "gamma_l",
            GroupField::GammaP => "gamma_p",
            GroupField::KL => "k_l",
            GroupField::Seed => "seed",
            GroupField::Eta => "eta",
            GroupField::RepDim => "rep_dim",
        }
    }

    fn value(self, r: &EvalRecord) -> KeyPart {
        let num = |v: Option<f64>| v.map_or(KeyPart::Missing, KeyPart::Number);
        match self {
            GroupField::Method => KeyPart::Text(r.method.clone()),
            GroupField::Dataset => KeyPart::Text(r.dataset.clone()),
            GroupField::NormalClass => num(r.normal_class.map(|c| c as f64)),
            GroupField::GammaL => KeyPart::Number(r.gamma_l),
            GroupField::GammaP => KeyPart::Number(r.gamma_p),
            GroupField::KL => KeyPart::Number(r.k_l as f64),
            GroupField::Seed => KeyPart::Number(r.seed as f64),
            GroupField::Eta => num(r.eta),
            GroupField::RepDim => num(r.rep_dim.map(|d| d as f64)),
        }
    }
}

/// Group key component; numbers order numerically, missing values first.
#[derive(Debug, Clone, PartialEq)]
pub enum KeyPart {
    Missing,
    Number(f64),
    Text(String),
}

impl Eq for KeyPart {}

impl Ord for KeyPart {
    fn cmp(&self, other: &Self) -> Ordering {
        use KeyPart::*;
        match (self, other) {
            (Missing, Missing) => Ordering::Equal,
            (Missing, _) => Ordering::Less,
            (_, Missing) => Ordering::Greater,
            (Number(a), Number(b)) => a.total_cmp(b),
            (Number(_), Text(_)) => Ordering::Less,
            (Text(_), Number(_)) => Ordering::Greater,
            (Text(a), Text(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for KeyPart {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for KeyPart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KeyPart::Missing => write!(f, "-"),
            KeyPart::Number(v) => write!(f, "{v}"),
            KeyPart::Text(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: Vec<KeyPart>,
    pub mean: f64,
    /// Sample standard deviation; 0 when `count == 1`.
    pub std: f64,
    pub count: usize,
    /// False when `count == 1` and the sample standard deviation is undefined.
    pub std_defined: bool,
}

/// Sample mean and standard deviation (`n − 1` denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Mean ± sample std of AUC per group, groups in ascending key order. Records
/// without an AUC (skipped cells) are ignored.
pub fn aggregate(records: &[EvalRecord], group_by: &[GroupField]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<Vec<KeyPart>, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(auc) = r.auc {
            let key = group_by.iter().map(|g| g.value(r)).collect();
            groups.entry(key).or_default().push(auc);
        }
    }
    groups
        .into_iter()
        .map(|(key, v)| {
            let (mean, std) = mean_std(&v);
            SummaryRow {
                key,
                mean,
                std,
                count: v.len(),
                std_defined: v.len() > 1,
            }
        })
        .collect()
}

/// Delimited summary table with a header row.
pub fn format_summary(rows: &[SummaryRow], group_by: &[GroupField]) -> String {
    let mut s = String::new();
    for g in group_by {
        s.push_str(g.name());
        s.push(',');
    }
    s.push_str("mean_auc,std_auc,count\n");
    for r in rows {
        for k in &r.key {
            s.push_str(&format!("{k},"));
        }
        let std = if r.std_defined {
            format!("{:.4}", r.std)
        } else {
            format!("{:.4}*", r.std)
        };
        s.push_str(&format!("{:.4},{std},{}\n", r.mean, r.count));
    }
    s
}
