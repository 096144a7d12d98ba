//! Brute-force oracles for the metric and radius solvers. Shared by the
//! core property tests and the acceptance target.

use deepsad_core::Polarity;

/// (#anomaly above normal + ½·#ties) / (#anomalies · #normals)
pub fn pair_count_auc(scores: &[f64], labels: &[Polarity]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, li) in labels.iter().enumerate() {
        if !li.is_anomaly() {
            continue;
        }
        for (j, lj) in labels.iter().enumerate() {
            if lj.is_anomaly() {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// `k·objective` with `ν = k/n`: `k·R² + Σ max(0, dᵢ − R²)`, exact for
/// integer distances.
pub fn scaled_objective(d: &[f64], r: f64, k: usize) -> f64 {
    k as f64 * r + d.iter().map(|&x| (x - r).max(0.0)).sum::<f64>()
}

/// Two-sided `min(1, 2·P(T ≤ w))` by enumerating all `2ⁿ` sign patterns.
pub fn enumerated_p(ranks: &[f64], w: f64) -> f64 {
    let n = ranks.len();
    let mut below = 0u64;
    for mask in 0u32..(1 << n) {
        let t: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if t <= w {
            below += 1;
        }
    }
    (2.0 * below as f64 / (1u64 << n) as f64).min(1.0)
}
