//! Central finite-difference verification of backpropagated gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Layer, Mode};
use super::network::{Gradients, Network};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is (numerically) zero are judged by absolute error instead.
const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
}

/// Analytic gradient of `loss(forward(batch)) + λ/2·Σ‖W‖²` (training mode).
pub fn analytic_gradients<F>(
    net: &Network,
    batch: &Matrix,
    loss_fn: &F,
    weight_decay: f64,
) -> Result<Gradients>
where
    F: Fn(&Matrix) -> Result<(f64, Matrix)>,
{
    let (out, tape) = net.forward(batch, Mode::Training)?;
    let (_, grad_out) = loss_fn(&out)?;
    let (mut grads, _) = net.backward(&tape, &grad_out)?;
    for ((g, p), info) in grads
        .tensors
        .iter_mut()
        .zip(net.params())
        .zip(net.param_infos())
    {
        if info.decay {
            for (gv, pv) in g.iter_mut().zip(p) {
                *gv += weight_decay * pv;
            }
        }
    }
    Ok(grads)
}

fn total_loss<F>(net: &Network, batch: &Matrix, loss_fn: &F, weight_decay: f64) -> Result<f64>
where
    F: Fn(&Matrix) -> Result<(f64, Matrix)>,
{
    let (out, _) = net.forward(batch, Mode::Training)?;
    let (loss, _) = loss_fn(&out)?;
    let total = loss + net.weight_decay_penalty(weight_decay);
    if !total.is_finite() {
        return Err(Error::Numeric("loss is not finite".into()));
    }
    Ok(total)
}

/// Compares `analytic` against `(L(θ+ε) − L(θ−ε)) / 2ε` for every parameter
/// coordinate. The relative error of a coordinate is
/// `|analytic − numeric| / max(|numeric|, 1e-6)`.
pub fn compare_with_finite_differences<F>(
    net: &Network,
    batch: &Matrix,
    loss_fn: &F,
    weight_decay: f64,
    fd_eps: f64,
    analytic: &Gradients,
) -> Result<GradCheckReport>
where
    F: Fn(&Matrix) -> Result<(f64, Matrix)>,
{
    compare_coordinates(
        net,
        batch,
        loss_fn,
        weight_decay,
        fd_eps,
        analytic,
        |_, len| (0..len).collect(),
    )
}

fn compare_coordinates<F, S>(
    net: &Network,
    batch: &Matrix,
    loss_fn: &F,
    weight_decay: f64,
    fd_eps: f64,
    analytic: &Gradients,
    mut coords: S,
) -> Result<GradCheckReport>
where
    F: Fn(&Matrix) -> Result<(f64, Matrix)>,
    S: FnMut(usize, usize) -> Vec<usize>,
{
    if !(fd_eps > 0.0) {
        return Err(Error::invalid("fd_eps must be positive"));
    }
    let infos = net.param_infos();
    if analytic.tensors.len() != infos.len() {
        return Err(Error::shape("gradient tensor count mismatch"));
    }
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
    };
    for (k, info) in infos.iter().enumerate() {
        for i in coords(k, info.len) {
            let orig = probe.params()[k][i];
            probe.params_mut()[k][i] = orig + fd_eps;
            let plus = total_loss(&probe, batch, loss_fn, weight_decay)?;
            probe.params_mut()[k][i] = orig - fd_eps;
            let minus = total_loss(&probe, batch, loss_fn, weight_decay)?;
            probe.params_mut()[k][i] = orig;
            let numeric = (plus - minus) / (2.0 * fd_eps);
            let err = (analytic.tensors[k][i] - numeric).abs() / numeric.abs().max(RELATIVE_FLOOR);
            report.checked += 1;
            if err > report.max_relative_error || report.checked == 1 {
                report.max_relative_error = err;
                report.worst_param = info.name.clone();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}

/// Like [`gradient_check`] but probes at most `per_tensor` coordinates of each
/// parameter tensor, drawn without replacement from a seeded generator. Wide
/// layers have tens of thousands of weights; every one costs two forward passes.
pub fn gradient_check_sampled<F>(
    net: &Network,
    batch: &Matrix,
    loss_fn: F,
    weight_decay: f64,
    fd_eps: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&Matrix) -> Result<(f64, Matrix)>,
{
    let analytic = analytic_gradients(net, batch, &loss_fn, weight_decay)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    compare_coordinates(
        net,
        batch,
        &loss_fn,
        weight_decay,
        fd_eps,
        &analytic,
        |_, len| {
            if len <= per_tensor {
                (0..len).collect()
            } else {
                let mut v = sample(&mut rng, len, per_tensor).into_vec();
                v.sort_unstable();
                v
            }
        },
    )
}

/// Smallest `|z|` over every pre-activation entering a leaky ReLU in a
/// training-mode pass; `+∞` when the network has none. Finite differences are
/// only meaningful when this is well above `fd_eps`.
pub fn kink_margin(net: &Network, batch: &Matrix) -> Result<f64> {
    let (_, tape) = net.forward(batch, Mode::Training)?;
    let mut margin = f64::INFINITY;
    for (k, layer) in net.layers().iter().enumerate() {
        if let (Layer::LeakyRelu(_), Some(z)) = (layer, tape.layer_input(k)) {
            margin = z.as_slice().iter().fold(margin, |m, v| m.min(v.abs()));
        }
    }
    Ok(margin)
}

/// Backward-vs-finite-difference check of a whole network under `loss_fn`.
pub fn gradient_check<F>(
    net: &Network,
    batch: &Matrix,
    loss_fn: F,
    weight_decay: f64,
    fd_eps: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&Matrix) -> Result<(f64, Matrix)>,
{
    let analytic = analytic_gradients(net, batch, &loss_fn, weight_decay)?;
    compare_with_finite_differences(net, batch, &loss_fn, weight_decay, fd_eps, &analytic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn half_sum_sq(out: &Matrix) -> Result<(f64, Matrix)> {
        Ok((0.5 * out.frobenius_sq(), out.clone()))
    }

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| r.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn linear_layer_quadratic_loss_is_exact() {
        let net = Network::new(
            &Architecture::mlp(4, &[], 3, false),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let x = random_batch(5, 4, 2);
        let rep = gradient_check(&net, &x, half_sum_sq, 0.1, 1e-5).unwrap();
        assert!(rep.max_relative_error < 1e-9, "{rep:?}");
    }

    #[test]
    fn leaky_relu_net_passes() {
        let net = Network::new(
            &Architecture::mlp(4, &[6, 5], 3, false),
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        let x = random_batch(7, 4, 5);
        let rep = gradient_check(&net, &x, half_sum_sq, 0.0, 1e-6).unwrap();
        assert!(rep.max_relative_error < 1e-4, "{rep:?}");
    }

    #[test]
    fn corrupted_gradient_is_reported() {
        let net = Network::new(
            &Architecture::mlp(3, &[4], 2, false),
            &mut ChaCha8Rng::seed_from_u64(8),
        )
        .unwrap();
        let x = random_batch(6, 3, 9);
        let mut g = analytic_gradients(&net, &x, &half_sum_sq, 0.0).unwrap();
        g.scale(2.0);
        let rep = compare_with_finite_differences(&net, &x, &half_sum_sq, 0.0, 1e-6, &g).unwrap();
        assert!((rep.max_relative_error - 1.0).abs() < 1e-3, "{rep:?}");
    }

    #[test]
    fn sampled_check_visits_capped_coordinates() {
        let net = Network::new(
            &Architecture::mlp(6, &[5], 3, false),
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap();
        let x = random_batch(4, 6, 3);
        let rep = gradient_check_sampled(&net, &x, half_sum_sq, 0.0, 1e-6, 4, 0).unwrap();
        assert_eq!(rep.checked, 8);
        assert!(rep.max_relative_error < 1e-4, "{rep:?}");
    }

    #[test]
    fn kink_margin_sees_hidden_preactivations() {
        let net = Network::new(
            &Architecture::mlp(2, &[3], 2, false),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let zero = Matrix::zeros(2, 2);
        assert_eq!(kink_margin(&net, &zero).unwrap(), 0.0);
        let x = random_batch(4, 2, 7);
        assert!(kink_margin(&net, &x).unwrap() > 0.0);
        let linear = Network::new(
            &Architecture::mlp(2, &[], 2, false),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert_eq!(kink_margin(&linear, &x).unwrap(), f64::INFINITY);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let net = Network::new(
            &Architecture::mlp(2, &[], 1, false),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let x = random_batch(3, 2, 1);
        let bad = |o: &Matrix| Ok((f64::INFINITY, o.clone()));
        assert!(matches!(
            gradient_check(&net, &x, bad, 0.0, 1e-6),
            Err(Error::Numeric(_))
        ));
    }
}
