use criterion::{black_box, criterion_group, criterion_main, Criterion};
use deepsad_bench::{random_matrix, random_scores};
use deepsad_core::baselines::{iforest_fit, kde_fit, IForestConfig};
use deepsad_core::eval::auc_roc;
use deepsad_core::models::deep_sad_loss;
use deepsad_core::{Architecture, Mode, Network, SemiLabel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn network(c: &mut Criterion) {
    let arch = Architecture::parse_widths(36, "32-16-8", true).unwrap();
    let net = Network::new(&arch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let batch = random_matrix(200, 36, 1);
    let mut labels = vec![SemiLabel::Unlabeled; 200];
    labels[0] = SemiLabel::Anomaly;
    let center = vec![0.1; 8];
    c.bench_function("mlp_forward_200x36", |b| {
        b.iter(|| net.forward(black_box(&batch), Mode::Training).unwrap())
    });
    c.bench_function("mlp_forward_backward_deep_sad_200x36", |b| {
        b.iter(|| {
            let (out, tape) = net.forward(&batch, Mode::Training).unwrap();
            let l = deep_sad_loss(&out, &labels, &center, 1.0, 1e-6).unwrap();
            net.backward(&tape, &l.grad).unwrap()
        })
    });
}

fn metrics(c: &mut Criterion) {
    let (scores, labels) = random_scores(10_000, 2);
    c.bench_function("auc_10k", |b| {
        b.iter(|| auc_roc(black_box(&scores), &labels).unwrap())
    });
}

fn shallow(c: &mut Criterion) {
    let x = random_matrix(1000, 8, 3);
    let grid = [0.5, 1.0, 2.0];
    c.bench_function("kde_fit_cv_1000x8", |b| {
        b.iter(|| kde_fit(black_box(&x), &grid, 5, 0).unwrap())
    });
    let cfg = IForestConfig {
        trees: 100,
        subsample: 256,
        seed: 0,
    };
    c.bench_function("iforest_fit_1000x8", |b| {
        b.iter(|| iforest_fit(black_box(&x), &cfg).unwrap())
    });
    let forest = iforest_fit(&x, &cfg).unwrap();
    c.bench_function("iforest_score_1000x8", |b| {
        b.iter(|| forest.score(black_box(&x)).unwrap())
    });
}

criterion_group!(benches, network, metrics, shallow);
criterion_main!(benches);
