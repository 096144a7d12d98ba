use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::labels::Polarity;

/// 1-based ranks with tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) hold ranks i+1..=j.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Area under the ROC curve with anomalies as the positive class and higher
/// scores meaning more anomalous. Ties count one half.
pub fn auc_roc(scores: &[f64], labels: &[Polarity]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let pos = labels.iter().filter(|l| l.is_anomaly()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs both normal and anomalous labels".into(),
        ));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.is_anomaly())
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// `min(W⁺, W⁻)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    /// Number of nonzero differences.
    pub n: usize,
    pub method: PValueMethod,
}

pub const WILCOXON_MIN_PAIRS: usize = 5;
pub const WILCOXON_EXACT_MAX: usize = 20;

/// Nonzero differences `a − b` and the average ranks of their magnitudes.
fn signed_ranks(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "paired samples of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|v| *v != 0.0)
        .collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("paired samples must be finite"));
    }
    if d.len() < WILCOXON_MIN_PAIRS {
        return Err(Error::InsufficientData(format!(
            "{} nonzero differences, at least {WILCOXON_MIN_PAIRS} needed",
            d.len()
        )));
    }
    let mag: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&mag);
    Ok((d, ranks))
}

/// Exact two-sided p-value `min(1, 2·P(T ≤ w))` where `T` is the signed-rank
/// sum under random signs. Ranks may be half-integers (ties); the count of
/// sign patterns per doubled sum is built by dynamic programming.
pub fn wilcoxon_exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (2.0 * w).round() as usize;
    let below: f64 = counts[..=limit.min(total)].iter().sum();
    let all = 2f64.powi(ranks.len() as i32);
    (2.0 * below / all).min(1.0)
}

/// Normal approximation with tie correction and a 0.5 continuity correction.
pub fn wilcoxon_normal_p(ranks: &[f64], w: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::standard();
    (2.0 * (1.0 - std.cdf(z))).min(1.0)
}

/// Wilcoxon signed-rank test on paired samples. Zero differences are dropped.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let (d, ranks) = signed_ranks(a, b)?;
    let w_plus: f64 = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let w_minus: f64 = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v < 0.0)
        .map(|(_, r)| r)
        .sum();
    let w = w_plus.min(w_minus);
    let (p_value, method) = if d.len() <= WILCOXON_EXACT_MAX {
        (wilcoxon_exact_p(&ranks, w), PValueMethod::Exact)
    } else {
        (wilcoxon_normal_p(&ranks, w), PValueMethod::NormalApprox)
    };
    Ok(WilcoxonResult {
        statistic: w,
        w_plus,
        w_minus,
        p_value,
        n: d.len(),
        method,
    })
}

/// Ranks and statistic for the nonzero differences of `a − b`; exposed so the
/// two p-value paths can be compared on the same input.
pub fn wilcoxon_ranks(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (d, ranks) = signed_ranks(a, b)?;
    let wp: f64 = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total: f64 = ranks.iter().sum();
    Ok((ranks, wp.min(total - wp)))
}
