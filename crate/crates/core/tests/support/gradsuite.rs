//! Finite-difference audit of every objective on a given architecture.
//! Shared by the core gradient tests and the acceptance target.

use deepsad_core::models::{
    bce_loss, deep_sad_loss, mse_loss, one_class_loss, soft_boundary_loss, Autoencoder,
    SoftBoundaryState,
};
use deepsad_core::nn::{
    glorot_init, gradient_check_sampled, kink_margin, DenseLayer, Layer, LeakyRelu,
    DEFAULT_LEAKINESS,
};
use deepsad_core::{Architecture, Matrix, Network, SemiLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
const PER_TENSOR: usize = 24;
const ROWS: usize = 12;

/// (name, input width, hidden widths, representation width)
pub const SHAPES: &[(&str, usize, &[usize], usize)] = &[
    ("arrhythmia", 274, &[128, 64], 32),
    ("cardio", 21, &[32, 16], 8),
    ("satellite", 36, &[32, 16], 8),
    ("satimage-2", 36, &[32, 16], 8),
    ("shuttle", 9, &[32, 16], 8),
    ("thyroid", 6, &[32, 16], 4),
];

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let v = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Matrix::from_vec(rows, cols, v).unwrap()
}

/// A random batch whose leaky-ReLU pre-activations all sit at least
/// `10·FD_EPS` from zero.
fn batch_away_from_kinks(net: &Network, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let x = uniform(ROWS, net.input_dim(), &mut rng);
        if kink_margin(net, &x).unwrap() > 10.0 * FD_EPS {
            return x;
        }
    }
    panic!("no batch clear of activation kinks");
}

fn mixed_labels(rows: usize) -> Vec<SemiLabel> {
    (0..rows)
        .map(|i| match i % 3 {
            0 => SemiLabel::Unlabeled,
            1 => SemiLabel::Normal,
            _ => SemiLabel::Anomaly,
        })
        .collect()
}

fn random_center(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d).map(|_| rng.random_range(-0.5..0.5)).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A radius between two neighbouring distances in the middle of the batch so
/// some rows sit outside and the hinge is far from every row.
fn radius_between(net: &Network, x: &Matrix, c: &[f64]) -> f64 {
    let (out, _) = net.forward(x, deepsad_core::Mode::Training).unwrap();
    let mut d: Vec<f64> = out.iter_rows().map(|r| sq_dist(r, c)).collect();
    d.sort_by(f64::total_cmp);
    let k = d.len() / 2;
    assert!(
        d[k] - d[k - 1] > 1e-4,
        "distances too close for a clean hinge"
    );
    0.5 * (d[k] + d[k - 1])
}

fn classifier(arch: &Architecture, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = Network::new(arch, &mut rng).unwrap();
    let rep = phi.output_dim();
    let head = Network::from_layers(
        rep,
        vec![
            Layer::LeakyRelu(LeakyRelu::new(DEFAULT_LEAKINESS).unwrap()),
            Layer::Dense(DenseLayer {
                weights: glorot_init(rep, 1, &mut rng).unwrap(),
                bias: Some(vec![0.1]),
            }),
        ],
    )
    .unwrap();
    phi.concat(&head).unwrap()
}

/// Worst relative error of each objective on one architecture.
pub fn check_all(arch: &Architecture, seed: u64) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let rep = arch.output_dim().unwrap();
    let wd = 1e-6;

    let ae = Autoencoder::init(arch, seed).unwrap();
    let net = ae.encoder.concat(&ae.decoder).unwrap();
    let x = batch_away_from_kinks(&net, seed);
    let target = x.clone();
    let r = gradient_check_sampled(
        &net,
        &x,
        |o| {
            let l = mse_loss(o, &target)?;
            Ok((l.loss, l.grad))
        },
        wd,
        FD_EPS,
        PER_TENSOR,
        seed,
    )
    .unwrap();
    out.push(("ae-mse", r.max_relative_error));

    let phi = Network::new(arch, &mut ChaCha8Rng::seed_from_u64(seed + 1)).unwrap();
    let x = batch_away_from_kinks(&phi, seed + 1);
    let c = random_center(rep, seed);
    let r = gradient_check_sampled(
        &phi,
        &x,
        |o| {
            let l = one_class_loss(o, &c)?;
            Ok((l.loss, l.grad))
        },
        wd,
        FD_EPS,
        PER_TENSOR,
        seed,
    )
    .unwrap();
    out.push(("one-class", r.max_relative_error));

    let labels = mixed_labels(ROWS);
    let r = gradient_check_sampled(
        &phi,
        &x,
        |o| {
            let l = deep_sad_loss(o, &labels, &c, 1.0, 1e-6)?;
            Ok((l.loss, l.grad))
        },
        wd,
        FD_EPS,
        PER_TENSOR,
        seed,
    )
    .unwrap();
    out.push(("deep-sad", r.max_relative_error));

    let state = SoftBoundaryState {
        radius_sq: radius_between(&phi, &x, &c),
        nu: 0.5,
    };
    let r = gradient_check_sampled(
        &phi,
        &x,
        |o| {
            let l = soft_boundary_loss(o, &c, &state)?;
            Ok((l.loss, l.grad))
        },
        wd,
        FD_EPS,
        PER_TENSOR,
        seed,
    )
    .unwrap();
    out.push(("soft-boundary", r.max_relative_error));

    let net = classifier(arch, seed + 2);
    let x = batch_away_from_kinks(&net, seed + 2);
    let targets: Vec<f64> = (0..ROWS).map(|i| (i % 2) as f64).collect();
    let r = gradient_check_sampled(
        &net,
        &x,
        |o| {
            let l = bce_loss(o, &targets)?;
            Ok((l.loss, l.grad))
        },
        wd,
        FD_EPS,
        PER_TENSOR,
        seed,
    )
    .unwrap();
    out.push(("bce", r.max_relative_error));
    out
}
