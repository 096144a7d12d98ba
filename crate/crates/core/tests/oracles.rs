//! Metric and radius solvers checked against brute-force oracles.

use deepsad_core::eval::{
    auc_roc, wilcoxon_exact_p, wilcoxon_normal_p, wilcoxon_ranks, wilcoxon_signed_rank,
};
use deepsad_core::models::update_radius;
use deepsad_core::Polarity;
use proptest::prelude::*;

#[path = "support/brute.rs"]
mod brute;

use brute::{enumerated_p, pair_count_auc, scaled_objective};

fn polarity(anomaly: bool) -> Polarity {
    if anomaly {
        Polarity::Anomaly
    } else {
        Polarity::Normal
    }
}

/// Scores on a coarse integer grid so ties are common, with at least one row
/// of each polarity.
fn scored_labels(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<Polarity>)> {
    (2..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(0i32..20, n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter_map("both polarities", |(s, a)| {
                if a.iter().all(|&x| x) || a.iter().all(|&x| !x) {
                    return None;
                }
                Some((
                    s.into_iter().map(f64::from).collect(),
                    a.into_iter().map(polarity).collect(),
                ))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn auc_equals_pair_count((scores, labels) in scored_labels(200)) {
        let auc = auc_roc(&scores, &labels).unwrap();
        prop_assert_eq!(auc, pair_count_auc(&scores, &labels));
    }

    #[test]
    fn auc_invariant_under_increasing_maps((scores, labels) in scored_labels(60)) {
        let base = auc_roc(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (0.3 * s).exp() * 7.0 - 2.0).collect();
        prop_assert_eq!(auc_roc(&mapped, &labels).unwrap(), base);
        let cubed: Vec<f64> = scores.iter().map(|s| (s - 10.0).powi(3)).collect();
        prop_assert_eq!(auc_roc(&cubed, &labels).unwrap(), base);
    }

    #[test]
    fn negated_scores_complement_when_untied(
        raw in prop::collection::vec((-1e3f64..1e3, any::<bool>()), 2..80)
    ) {
        let mut seen = std::collections::HashSet::new();
        prop_assume!(raw.iter().all(|(s, _)| seen.insert(s.to_bits())));
        prop_assume!(raw.iter().any(|r| r.1) && raw.iter().any(|r| !r.1));
        let scores: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let labels: Vec<Polarity> = raw.iter().map(|r| polarity(r.1)).collect();
        let sum = auc_roc(&scores, &labels).unwrap() + auc_roc(&neg, &labels).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radius_is_the_scan_minimizer(
        d in prop::collection::vec(0u32..50, 1..40),
        k_frac in 0.0f64..1.0,
    ) {
        let n = d.len();
        let k = 1 + ((k_frac * n as f64) as usize).min(n - 1);
        let nu = k as f64 / n as f64;
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        let r = update_radius(&d, nu).unwrap();
        prop_assert!(r == 0.0 || d.contains(&r));
        let best = d
            .iter()
            .chain(std::iter::once(&0.0))
            .map(|&c| scaled_objective(&d, c, k))
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(scaled_objective(&d, r, k), best);
    }

    #[test]
    fn radius_on_real_distances_is_a_scan_minimizer(
        d in prop::collection::vec(0.0f64..10.0, 1..60),
        nu in 0.01f64..1.0,
    ) {
        let n = d.len() as f64;
        let objective = |r: f64| r + d.iter().map(|&x| (x - r).max(0.0)).sum::<f64>() / (nu * n);
        let r = update_radius(&d, nu).unwrap();
        let best = d
            .iter()
            .chain(std::iter::once(&0.0))
            .map(|&c| objective(c))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(objective(r) <= best * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn exact_wilcoxon_matches_enumeration(
        diffs in prop::collection::vec(prop_oneof![-6i32..0, 1i32..7], 5..=12)
    ) {
        let a: Vec<f64> = diffs.iter().map(|&v| f64::from(v)).collect();
        let b = vec![0.0; a.len()];
        let (ranks, w) = wilcoxon_ranks(&a, &b).unwrap();
        let p = wilcoxon_exact_p(&ranks, w);
        prop_assert_eq!(p, enumerated_p(&ranks, w));
        prop_assert!(p > 0.0 && p <= 1.0);
        let full = wilcoxon_signed_rank(&a, &b).unwrap();
        prop_assert_eq!(full.p_value, p);
        let swapped = wilcoxon_signed_rank(&b, &a).unwrap();
        prop_assert_eq!((swapped.statistic, swapped.p_value), (full.statistic, full.p_value));
    }

    #[test]
    fn normal_and_exact_agree_at_twenty(
        diffs in prop::collection::vec(prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3], 20)
    ) {
        let b = vec![0.0; 20];
        let (ranks, w) = wilcoxon_ranks(&diffs, &b).unwrap();
        let exact = wilcoxon_exact_p(&ranks, w);
        let approx = wilcoxon_normal_p(&ranks, w);
        prop_assert!((exact - approx).abs() < 0.02, "exact {exact} normal {approx}");
        prop_assert!(approx > 0.0 && approx <= 1.0);
    }
}
