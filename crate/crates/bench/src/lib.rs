//! Input generators shared by the benchmarks.

use deepsad_core::{Matrix, Polarity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `rows × cols` uniform values in [-1, 1).
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}

/// Scores with about one anomaly in ten.
pub fn random_scores(n: usize, seed: u64) -> (Vec<f64>, Vec<Polarity>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<Polarity> = (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                Polarity::Anomaly
            } else {
                Polarity::Normal
            }
        })
        .collect();
    labels[0] = Polarity::Anomaly;
    labels[1] = Polarity::Normal;
    let scores = (0..n).map(|_| rng.random::<f64>()).collect();
    (scores, labels)
}
