//! Backpropagation against central finite differences for every tabular
//! network shape and every training objective.

#[path = "support/gradsuite.rs"]
mod gradsuite;

use deepsad_core::Architecture;
use gradsuite::{check_all, SHAPES, TOL};
use proptest::prelude::*;

#[test]
fn every_tabular_architecture_and_objective() {
    for &(name, d, hidden, rep) in SHAPES {
        for bn in [true, false] {
            let arch = Architecture::mlp(d, hidden, rep, bn);
            for (loss, err) in check_all(&arch, 11) {
                assert!(err < TOL, "{name} bn={bn} {loss}: {err:e}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_small_networks(
        d in 2usize..8,
        hidden in prop::collection::vec(2usize..9, 0..3),
        rep in 1usize..5,
        bn in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let arch = Architecture::mlp(d, &hidden, rep, bn);
        for (loss, err) in check_all(&arch, seed) {
            prop_assert!(err < TOL, "{loss}: {err:e}");
        }
    }
}
