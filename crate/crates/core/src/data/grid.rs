//! Scenario-grid files.
//!
//! ```text
//! # scenario (i), one normal class
//! [cell]
//! dataset = mnist
//! methods = deep-sad, one-class
//! normal_class = 0
//! gamma_l = 0, 0.05, 0.1
//! gamma_p = 0
//! k_l = 1
//! seeds = 0, 1
//! ```
//!
//! Every key may hold a comma-separated list; a cell expands to the cartesian
//! product. `anomaly_classes` (optional) fixes the labeled classes instead of
//! drawing `k_l` at random. `eta` and `rep_dim` (optional) override method
//! hyperparameters for sensitivity sweeps.

use std::str::FromStr;

use super::scenario::{AnomalyClassChoice, ScenarioConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub dataset: String,
    pub methods: Vec<String>,
    pub normal_classes: Vec<i64>,
    pub gamma_l: Vec<f64>,
    pub gamma_p: Vec<f64>,
    pub k_l: Vec<usize>,
    pub anomaly_classes: Option<Vec<i64>>,
    pub seeds: Vec<u64>,
    pub eta: Vec<f64>,
    pub rep_dim: Vec<usize>,
}

/// One fully specified run: a method on a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub dataset: String,
    pub method: String,
    pub scenario: ScenarioConfig,
    pub eta: Option<f64>,
    pub rep_dim: Option<usize>,
}

fn list<T: FromStr>(value: &str, key: &str, line: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse().map_err(|_| Error::Parse {
                row: line,
                column: key.to_string(),
                message: format!("cannot parse `{s}`"),
            })
        })
        .collect()
}

#[derive(Default)]
struct Partial {
    start: usize,
    dataset: Option<String>,
    methods: Vec<String>,
    normal_classes: Vec<i64>,
    gamma_l: Vec<f64>,
    gamma_p: Vec<f64>,
    k_l: Vec<usize>,
    anomaly_classes: Option<Vec<i64>>,
    seeds: Vec<u64>,
    eta: Vec<f64>,
    rep_dim: Vec<usize>,
}

impl Partial {
    fn finish(self) -> Result<GridCell> {
        let at = self.start;
        let need = |ok: bool, key: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Format(format!(
                    "cell starting at line {at} lacks `{key}`"
                )))
            }
        };
        need(self.dataset.is_some(), "dataset")?;
        need(!self.methods.is_empty(), "methods")?;
        need(!self.normal_classes.is_empty(), "normal_class")?;
        need(!self.seeds.is_empty(), "seeds")?;
        let k_l = if self.k_l.is_empty() {
            vec![self.anomaly_classes.as_ref().map_or(1, Vec::len)]
        } else {
            self.k_l
        };
        Ok(GridCell {
            dataset: self.dataset.expect("checked"),
            methods: self.methods,
            normal_classes: self.normal_classes,
            gamma_l: if self.gamma_l.is_empty() {
                vec![0.0]
            } else {
                self.gamma_l
            },
            gamma_p: if self.gamma_p.is_empty() {
                vec![0.0]
            } else {
                self.gamma_p
            },
            k_l,
            anomaly_classes: self.anomaly_classes,
            seeds: self.seeds,
            eta: self.eta,
            rep_dim: self.rep_dim,
        })
    }
}

pub fn parse_grid(text: &str) -> Result<Vec<GridCell>> {
    let mut cells = Vec::new();
    let mut cur: Option<Partial> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') || !line[1..].trim_start().starts_with("cell") {
                return Err(Error::Format(format!("line {line_no}: expected `[cell]`")));
            }
            if let Some(p) = cur.take() {
                cells.push(p.finish()?);
            }
            cur = Some(Partial {
                start: line_no,
                ..Partial::default()
            });
            continue;
        }
        let Some(p) = cur.as_mut() else {
            return Err(Error::Format(format!(
                "line {line_no}: key outside a [cell] block"
            )));
        };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Format(format!("line {line_no}: expected `key = value`")))?;
        match key {
            "dataset" => p.dataset = Some(value.to_string()),
            "methods" | "method" => p.methods = list(value, key, line_no)?,
            "normal_class" | "normal_classes" => p.normal_classes = list(value, key, line_no)?,
            "gamma_l" => p.gamma_l = list(value, key, line_no)?,
            "gamma_p" => p.gamma_p = list(value, key, line_no)?,
            "k_l" => p.k_l = list(value, key, line_no)?,
            "anomaly_classes" => p.anomaly_classes = Some(list(value, key, line_no)?),
            "seeds" | "seed" => p.seeds = list(value, key, line_no)?,
            "eta" => p.eta = list(value, key, line_no)?,
            "rep_dim" => p.rep_dim = list(value, key, line_no)?,
            other => {
                return Err(Error::Format(format!(
                    "line {line_no}: unknown key `{other}`"
                )));
            }
        }
    }
    if let Some(p) = cur {
        cells.push(p.finish()?);
    }
    Ok(cells)
}

fn opt_list<T: Copy>(v: &[T]) -> Vec<Option<T>> {
    if v.is_empty() {
        vec![None]
    } else {
        v.iter().copied().map(Some).collect()
    }
}

impl GridCell {
    /// Expands to individual runs in a fixed order: method, normal class,
    /// γ_l, γ_p, k_l, η, rep_dim, seed.
    pub fn expand(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for method in &self.methods {
            for &normal in &self.normal_classes {
                for &gl in &self.gamma_l {
                    for &gp in &self.gamma_p {
                        for &k in &self.k_l {
                            for eta in opt_list(&self.eta) {
                                for rd in opt_list(&self.rep_dim) {
                                    for &seed in &self.seeds {
                                        let choice = match &self.anomaly_classes {
                                            Some(c) => AnomalyClassChoice::Explicit(c.clone()),
                                            None => AnomalyClassChoice::Random,
                                        };
                                        out.push(GridPoint {
                                            dataset: self.dataset.clone(),
                                            method: method.clone(),
                                            scenario: ScenarioConfig {
                                                normal_class: normal,
                                                gamma_l: gl,
                                                gamma_p: gp,
                                                k_l: k,
                                                anomaly_classes: choice,
                                                seed,
                                            },
                                            eta,
                                            rep_dim: rd,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_two_methods_three_ratios_two_seeds() {
        let g = parse_grid(
            "[cell]\ndataset = toy\nmethods = deep-sad, one-class\nnormal_class = 0\n\
             gamma_l = 0, 0.05, 0.1 # ratios\nseeds = 1,2\n",
        )
        .unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].expand().len(), 12);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_grid("[cell]\ndataset = x\ngamma_l = a\n").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 3, .. }));
        assert!(parse_grid("dataset = x\n").is_err());
        assert!(parse_grid("[cell]\ndataset = x\n").is_err());
    }
}
