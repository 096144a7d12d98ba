use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_LEAKINESS: f64 = 0.1;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.1;
pub const DEFAULT_BN_EPS: f64 = 1e-4;

/// Uniform Glorot initialization: entries drawn from `[-b, b]` with
/// `b = sqrt(6 / (fan_in + fan_out))`. The result has shape `fan_out × fan_in`.
pub fn glorot_init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid(format!(
            "glorot_init needs positive fan dimensions, got fan_in={fan_in} fan_out={fan_out}"
        )));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
    Matrix::from_vec(fan_out, fan_in, data)
}

/// One entry of an architecture config list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Dense {
        fan_in: usize,
        fan_out: usize,
        use_bias: bool,
    },
    LeakyRelu {
        leakiness: f64,
    },
    /// Batch normalization with a per-feature scale and no shift.
    BatchNorm {
        features: usize,
        momentum: f64,
        eps: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `fan_out × fan_in`.
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl DenseLayer {
    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = x.matmul_transposed(&self.weights);
        if let Some(bias) = &self.bias {
            for i in 0..out.rows() {
                for (o, b) in out.row_mut(i).iter_mut().zip(bias) {
                    *o += b;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakyRelu {
    pub leakiness: f64,
}

impl LeakyRelu {
    pub fn new(leakiness: f64) -> Result<Self> {
        if !(leakiness > 0.0 && leakiness < 1.0) {
            return Err(Error::invalid(format!(
                "leakiness must lie in (0, 1), got {leakiness}"
            )));
        }
        Ok(Self { leakiness })
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        if v > 0.0 {
            v
        } else {
            self.leakiness * v
        }
    }

    /// Derivative; the kink at exactly zero takes the negative-side slope.
    #[inline]
    pub fn derivative(&self, v: f64) -> f64 {
        if v > 0.0 {
            1.0
        } else {
            self.leakiness
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormScale {
    pub scale: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormScale {
    pub fn new(features: usize, momentum: f64, eps: f64) -> Result<Self> {
        if features == 0 {
            return Err(Error::invalid("batch norm needs at least one feature"));
        }
        if !(momentum > 0.0 && momentum <= 1.0) {
            return Err(Error::invalid(format!(
                "batch norm momentum must lie in (0, 1], got {momentum}"
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::invalid("batch norm eps must be positive"));
        }
        Ok(Self {
            scale: vec![1.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum,
            eps,
        })
    }

    pub fn features(&self) -> usize {
        self.scale.len()
    }
}

/// Batch statistics and normalized activations cached by a training-mode pass.
#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    /// Biased (population) variance of the batch.
    pub batch_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    LeakyRelu(LeakyRelu),
    BatchNorm(BatchNormScale),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                fan_in: d.fan_in(),
                fan_out: d.fan_out(),
                use_bias: d.bias.is_some(),
            },
            Layer::LeakyRelu(l) => LayerSpec::LeakyRelu {
                leakiness: l.leakiness,
            },
            Layer::BatchNorm(b) => LayerSpec::BatchNorm {
                features: b.features(),
                momentum: b.momentum,
                eps: b.eps,
            },
        }
    }

    pub(crate) fn forward(&self, x: &Matrix, mode: Mode) -> Result<(Matrix, Option<BnCache>)> {
        match self {
            Layer::Dense(d) => Ok((d.forward(x), None)),
            Layer::LeakyRelu(l) => Ok((x.map(|v| l.apply(v)), None)),
            Layer::BatchNorm(bn) => match mode {
                Mode::Training => {
                    let (out, cache) = bn_training_forward(bn, x)?;
                    Ok((out, Some(cache)))
                }
                Mode::Inference => Ok((bn_inference_forward(bn, x), None)),
            },
        }
    }

    pub(crate) fn num_params(&self) -> usize {
        match self {
            Layer::Dense(d) => 1 + usize::from(d.bias.is_some()),
            Layer::LeakyRelu(_) => 0,
            Layer::BatchNorm(_) => 1,
        }
    }
}

fn bn_training_forward(bn: &BatchNormScale, x: &Matrix) -> Result<(Matrix, BnCache)> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::invalid(format!(
            "batch norm in training mode needs a batch of at least 2 rows, got {n}"
        )));
    }
    let f = x.cols();
    let mean = x.column_means();
    let mut var = vec![0.0; f];
    for r in x.iter_rows() {
        for ((v, &xv), &m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (xv - m) * (xv - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= n as f64);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + bn.eps).sqrt()).collect();
    let mut normalized = Matrix::zeros(n, f);
    let mut out = Matrix::zeros(n, f);
    for i in 0..n {
        for j in 0..f {
            let z = (x[(i, j)] - mean[j]) * inv_std[j];
            normalized[(i, j)] = z;
            out[(i, j)] = bn.scale[j] * z;
        }
    }
    Ok((
        out,
        BnCache {
            normalized,
            inv_std,
            batch_mean: mean,
            batch_var: var,
        },
    ))
}

fn bn_inference_forward(bn: &BatchNormScale, x: &Matrix) -> Matrix {
    let mut out = x.clone();
    let f = x.cols();
    let factors: Vec<f64> = (0..f)
        .map(|j| bn.scale[j] / (bn.running_var[j] + bn.eps).sqrt())
        .collect();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = (*v - bn.running_mean[j]) * factors[j];
        }
    }
    out
}

/// Backward through a training-mode batch norm. Returns `(d_input, d_scale)`.
pub(crate) fn bn_training_backward(
    bn: &BatchNormScale,
    cache: &BnCache,
    grad_out: &Matrix,
) -> (Matrix, Vec<f64>) {
    let (n, f) = grad_out.shape();
    let nf = n as f64;
    let mut d_scale = vec![0.0; f];
    let mut sum_dxhat = vec![0.0; f];
    let mut sum_dxhat_xhat = vec![0.0; f];
    for i in 0..n {
        for j in 0..f {
            let g = grad_out[(i, j)];
            let xh = cache.normalized[(i, j)];
            d_scale[j] += g * xh;
            let dxh = g * bn.scale[j];
            sum_dxhat[j] += dxh;
            sum_dxhat_xhat[j] += dxh * xh;
        }
    }
    let mut d_in = Matrix::zeros(n, f);
    for i in 0..n {
        for j in 0..f {
            let dxh = grad_out[(i, j)] * bn.scale[j];
            let xh = cache.normalized[(i, j)];
            d_in[(i, j)] =
                cache.inv_std[j] / nf * (nf * dxh - sum_dxhat[j] - xh * sum_dxhat_xhat[j]);
        }
    }
    (d_in, d_scale)
}

/// Backward through an inference-mode batch norm (a fixed per-feature affine map).
pub(crate) fn bn_inference_backward(
    bn: &BatchNormScale,
    input: &Matrix,
    grad_out: &Matrix,
) -> (Matrix, Vec<f64>) {
    let (n, f) = grad_out.shape();
    let inv: Vec<f64> = (0..f)
        .map(|j| 1.0 / (bn.running_var[j] + bn.eps).sqrt())
        .collect();
    let mut d_scale = vec![0.0; f];
    let mut d_in = Matrix::zeros(n, f);
    for i in 0..n {
        for j in 0..f {
            let g = grad_out[(i, j)];
            d_scale[j] += g * (input[(i, j)] - bn.running_mean[j]) * inv[j];
            d_in[(i, j)] = g * bn.scale[j] * inv[j];
        }
    }
    (d_in, d_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glorot_bound_and_determinism() {
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let a = glorot_init(3, 3, &mut r1).unwrap();
        let b = glorot_init(3, 3, &mut r2).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn glorot_rejects_zero_fan() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            glorot_init(0, 3, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
        assert!(glorot_init(3, 0, &mut rng).is_err());
    }

    #[test]
    fn glorot_sample_mean_is_centered() {
        // 600x600 with b = sqrt(6/1200); 3.6e5 draws, of which we check the first 1e5.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = glorot_init(600, 600, &mut rng).unwrap();
        let b = (6.0f64 / 1200.0).sqrt();
        let n = 100_000usize;
        let mean: f64 = w.as_slice()[..n].iter().sum::<f64>() / n as f64;
        // std of uniform[-b,b] is b/sqrt(3); three standard errors.
        assert!(
            mean.abs() < 3.0 * b / (3.0 * n as f64).sqrt(),
            "mean {mean}"
        );
    }

    #[test]
    fn leaky_relu_values_and_kink() {
        let l = LeakyRelu::new(0.1).unwrap();
        assert!((l.apply(-2.0) + 0.2).abs() < 1e-15);
        assert_eq!(l.apply(3.0), 3.0);
        assert_eq!(l.derivative(0.0), 0.1);
        assert!(LeakyRelu::new(0.0).is_err());
        assert!(LeakyRelu::new(1.0).is_err());
    }

    #[test]
    fn batchnorm_normalizes_training_batches() {
        let bn = BatchNormScale::new(2, 0.1, 1e-12).unwrap();
        // Column 0 has population variance 4, column 1 arbitrary.
        let x = Matrix::from_rows(&[[1.0, 0.3], [5.0, -2.0], [3.0, 7.5], [-1.0, 1.0], [7.0, 0.0]])
            .unwrap();
        let col0 = x.column(0);
        let m0 = col0.iter().sum::<f64>() / 5.0;
        let v0 = col0.iter().map(|v| (v - m0).powi(2)).sum::<f64>() / 5.0;
        assert!((v0 - 8.0).abs() < 1e-12);
        let (_, cache) = bn_training_forward(&bn, &x).unwrap();
        for j in 0..2 {
            let col = cache.normalized.column(j);
            let mean = col.iter().sum::<f64>() / 5.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn batchnorm_unit_variance_for_variance_four() {
        let bn = BatchNormScale::new(1, 0.1, 1e-12).unwrap();
        let x = Matrix::from_rows(&[[-2.0], [2.0], [-2.0], [2.0]]).unwrap();
        let (out, _) = bn_training_forward(&bn, &x).unwrap();
        let var = out.as_slice().iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!((var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn batchnorm_rejects_single_row_in_training() {
        let bn = BatchNormScale::new(2, 0.1, 1e-4).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(
            bn_training_forward(&bn, &x),
            Err(Error::InvalidArgument(_))
        ));
    }
}
