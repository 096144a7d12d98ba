use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::layers::{
    bn_inference_backward, bn_training_backward, glorot_init, BatchNormScale, BnCache, DenseLayer,
    Layer, LayerSpec, LeakyRelu, Mode, DEFAULT_BN_EPS, DEFAULT_BN_MOMENTUM, DEFAULT_LEAKINESS,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

static REVISION: AtomicU64 = AtomicU64::new(1);

fn next_revision() -> u64 {
    REVISION.fetch_add(1, Ordering::Relaxed)
}

/// An ordered list of layer specs plus the input width.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    /// Bias-free MLP: `[Dense → BatchNorm → LeakyReLU]` per hidden width, then a
    /// final bias-free dense layer of width `rep_dim`.
    pub fn mlp(input_dim: usize, hidden: &[usize], rep_dim: usize, batch_norm: bool) -> Self {
        let mut layers = Vec::new();
        let mut width = input_dim;
        for &h in hidden {
            layers.push(LayerSpec::Dense {
                fan_in: width,
                fan_out: h,
                use_bias: false,
            });
            if batch_norm {
                layers.push(LayerSpec::BatchNorm {
                    features: h,
                    momentum: DEFAULT_BN_MOMENTUM,
                    eps: DEFAULT_BN_EPS,
                });
            }
            layers.push(LayerSpec::LeakyRelu {
                leakiness: DEFAULT_LEAKINESS,
            });
            width = h;
        }
        layers.push(LayerSpec::Dense {
            fan_in: width,
            fan_out: rep_dim,
            use_bias: false,
        });
        Self { input_dim, layers }
    }

    /// Parses a width list such as `"32-16-8"`: every entry but the last is a
    /// hidden layer, the last one is the representation dimension.
    pub fn parse_widths(input_dim: usize, widths: &str, batch_norm: bool) -> Result<Self> {
        let parsed: Vec<usize> = widths
            .split(['-', ','])
            .map(|w| {
                w.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad layer width {w:?} in {widths:?}")))
            })
            .collect::<Result<_>>()?;
        let (rep, hidden) = parsed
            .split_last()
            .ok_or_else(|| Error::invalid("empty architecture"))?;
        if parsed.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(Self::mlp(input_dim, hidden, *rep, batch_norm))
    }

    /// Mirror image of this (encoder) architecture, mapping the representation
    /// back to the input width. The final layer carries a bias; the decoder is
    /// never used as a hypersphere map.
    pub fn decoder(&self) -> Result<Self> {
        let dense: Vec<(usize, usize)> = self
            .layers
            .iter()
            .filter_map(|l| match *l {
                LayerSpec::Dense {
                    fan_in, fan_out, ..
                } => Some((fan_in, fan_out)),
                _ => None,
            })
            .collect();
        if dense.is_empty() {
            return Err(Error::invalid("architecture has no dense layer"));
        }
        let batch_norm = self
            .layers
            .iter()
            .any(|l| matches!(l, LayerSpec::BatchNorm { .. }));
        let leakiness = self
            .layers
            .iter()
            .find_map(|l| match *l {
                LayerSpec::LeakyRelu { leakiness } => Some(leakiness),
                _ => None,
            })
            .unwrap_or(DEFAULT_LEAKINESS);
        let rep_dim = dense.last().unwrap().1;
        let mut layers = Vec::new();
        let reversed: Vec<(usize, usize)> = dense.iter().rev().map(|&(i, o)| (o, i)).collect();
        let last = reversed.len() - 1;
        for (k, &(fan_in, fan_out)) in reversed.iter().enumerate() {
            let is_last = k == last;
            layers.push(LayerSpec::Dense {
                fan_in,
                fan_out,
                use_bias: is_last,
            });
            if !is_last {
                if batch_norm {
                    layers.push(LayerSpec::BatchNorm {
                        features: fan_out,
                        momentum: DEFAULT_BN_MOMENTUM,
                        eps: DEFAULT_BN_EPS,
                    });
                }
                layers.push(LayerSpec::LeakyRelu { leakiness });
            }
        }
        Ok(Self {
            input_dim: rep_dim,
            layers,
        })
    }

    /// Validates dimension compatibility and returns the output width.
    pub fn output_dim(&self) -> Result<usize> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        let mut width = self.input_dim;
        let mut saw_dense = false;
        for (i, spec) in self.layers.iter().enumerate() {
            match *spec {
                LayerSpec::Dense {
                    fan_in, fan_out, ..
                } => {
                    if fan_in != width {
                        return Err(Error::shape(format!(
                            "layer {i}: dense fan_in {fan_in} does not match incoming width {width}"
                        )));
                    }
                    if fan_out == 0 {
                        return Err(Error::invalid(format!("layer {i}: zero fan_out")));
                    }
                    width = fan_out;
                    saw_dense = true;
                }
                LayerSpec::BatchNorm { features, .. } => {
                    if features != width {
                        return Err(Error::shape(format!(
                            "layer {i}: batch norm over {features} features, incoming width {width}"
                        )));
                    }
                }
                LayerSpec::LeakyRelu { .. } => {}
            }
        }
        if !saw_dense {
            return Err(Error::invalid("architecture has no dense layer"));
        }
        Ok(width)
    }

    pub fn has_bias(&self) -> bool {
        self.layers
            .iter()
            .any(|l| matches!(l, LayerSpec::Dense { use_bias: true, .. }))
    }
}

/// Name and regularization flag of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: String,
    /// Only dense weight matrices carry L2 weight decay.
    pub decay: bool,
    pub len: usize,
}

/// One gradient buffer per parameter tensor, in declared order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Intermediates cached by [`Network::forward`], consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    revision: u64,
    mode: Mode,
    inputs: Vec<Matrix>,
    bn: Vec<Option<BnCache>>,
}

impl Tape {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Input of layer `k` as seen during the recorded pass.
    pub fn layer_input(&self, k: usize) -> Option<&Matrix> {
        self.inputs.get(k)
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
    revision: u64,
}

/// Compares structure and values; the tape revision counter is ignored.
impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim && self.layers == other.layers
    }
}

impl Network {
    /// Builds a network with Glorot-initialized weights, zero biases, unit
    /// batch-norm scales and default running statistics.
    pub fn new<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        let output_dim = arch.output_dim()?;
        let mut layers = Vec::with_capacity(arch.layers.len());
        for spec in &arch.layers {
            layers.push(match *spec {
                LayerSpec::Dense {
                    fan_in,
                    fan_out,
                    use_bias,
                } => Layer::Dense(DenseLayer {
                    weights: glorot_init(fan_in, fan_out, rng)?,
                    bias: use_bias.then(|| vec![0.0; fan_out]),
                }),
                LayerSpec::LeakyRelu { leakiness } => Layer::LeakyRelu(LeakyRelu::new(leakiness)?),
                LayerSpec::BatchNorm {
                    features,
                    momentum,
                    eps,
                } => Layer::BatchNorm(BatchNormScale::new(features, momentum, eps)?),
            });
        }
        Ok(Self {
            layers,
            input_dim: arch.input_dim,
            output_dim,
            revision: next_revision(),
        })
    }

    /// Assembles a network from explicit layers, validating dimensions.
    pub fn from_layers(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        let arch = Architecture {
            input_dim,
            layers: layers.iter().map(Layer::spec).collect(),
        };
        let output_dim = arch.output_dim()?;
        for (i, l) in layers.iter().enumerate() {
            match l {
                Layer::Dense(d) => {
                    if let Some(b) = &d.bias {
                        if b.len() != d.fan_out() {
                            return Err(Error::shape(format!("layer {i}: bias length mismatch")));
                        }
                    }
                }
                Layer::BatchNorm(b) => {
                    let f = b.features();
                    if b.running_mean.len() != f || b.running_var.len() != f {
                        return Err(Error::shape(format!("layer {i}: running stats length")));
                    }
                    if b.running_var.iter().any(|v| *v < 0.0) {
                        return Err(Error::invalid(format!(
                            "layer {i}: negative running variance"
                        )));
                    }
                }
                Layer::LeakyRelu(l) => {
                    LeakyRelu::new(l.leakiness)?;
                }
            }
        }
        Ok(Self {
            layers,
            input_dim,
            output_dim,
            revision: next_revision(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.input_dim,
            layers: self.layers.iter().map(Layer::spec).collect(),
        }
    }

    pub fn has_bias(&self) -> bool {
        self.layers
            .iter()
            .any(|l| matches!(l, Layer::Dense(d) if d.bias.is_some()))
    }

    /// Appends `tail` after `self`. Used to train an encoder/decoder pair or a
    /// classifier head as one network.
    pub fn concat(&self, tail: &Network) -> Result<Network> {
        if tail.input_dim != self.output_dim {
            return Err(Error::shape(format!(
                "cannot chain output width {} into input width {}",
                self.output_dim, tail.input_dim
            )));
        }
        let mut layers = self.layers.clone();
        layers.extend(tail.layers.iter().cloned());
        Network::from_layers(self.input_dim, layers)
    }

    /// Splits after the first `k` layers.
    pub fn split_at(&self, k: usize) -> Result<(Network, Network)> {
        if k == 0 || k >= self.layers.len() {
            return Err(Error::invalid(format!(
                "split point {k} outside 1..{}",
                self.layers.len()
            )));
        }
        let head = Network::from_layers(self.input_dim, self.layers[..k].to_vec())?;
        let tail = Network::from_layers(head.output_dim, self.layers[k..].to_vec())?;
        Ok((head, tail))
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim {
            return Err(Error::shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_dim
            )));
        }
        if batch.rows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        Ok(())
    }

    /// Runs the network, recording what backward needs. Training mode uses batch
    /// statistics in batch norm; running statistics are left untouched (see
    /// [`Network::update_running_stats`]).
    pub fn forward(&self, batch: &Matrix, mode: Mode) -> Result<(Matrix, Tape)> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut bn = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward(&x, mode)?;
            inputs.push(x);
            bn.push(cache);
            x = y;
        }
        Ok((
            x,
            Tape {
                revision: self.revision,
                mode,
                inputs,
                bn,
            },
        ))
    }

    /// Inference-mode forward pass without a tape.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = layer.forward(&x, Mode::Inference)?.0;
        }
        Ok(x)
    }

    /// Folds the batch statistics recorded in a training-mode tape into the
    /// running statistics: `running ← (1 − momentum)·running + momentum·batch`.
    pub fn update_running_stats(&mut self, tape: &Tape) -> Result<()> {
        if tape.mode != Mode::Training {
            return Ok(());
        }
        if tape.bn.len() != self.layers.len() {
            return Err(Error::InvalidState("tape does not match network".into()));
        }
        for (layer, cache) in self.layers.iter_mut().zip(&tape.bn) {
            if let (Layer::BatchNorm(b), Some(c)) = (layer, cache) {
                let m = b.momentum;
                for j in 0..b.features() {
                    b.running_mean[j] = (1.0 - m) * b.running_mean[j] + m * c.batch_mean[j];
                    b.running_var[j] = (1.0 - m) * b.running_var[j] + m * c.batch_var[j];
                }
            }
        }
        Ok(())
    }

    /// Backpropagates `grad_output` (∂loss/∂output) through the taped pass.
    /// Returns the parameter gradients and ∂loss/∂input.
    pub fn backward(&self, tape: &Tape, grad_output: &Matrix) -> Result<(Gradients, Matrix)> {
        if tape.revision != self.revision || tape.inputs.len() != self.layers.len() {
            return Err(Error::InvalidState(
                "tape was recorded on different or since-modified parameters".into(),
            ));
        }
        let n = tape.inputs.first().map_or(0, Matrix::rows);
        if grad_output.shape() != (n, self.output_dim) {
            return Err(Error::shape(format!(
                "grad_output is {:?}, expected ({n}, {})",
                grad_output.shape(),
                self.output_dim
            )));
        }
        let mut per_layer: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.layers.len()];
        let mut g = grad_output.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.inputs[idx];
            match layer {
                Layer::Dense(d) => {
                    let dw = g.transposed_matmul(input);
                    let mut grads = vec![dw.into_vec()];
                    if d.bias.is_some() {
                        let mut db = vec![0.0; d.fan_out()];
                        for r in g.iter_rows() {
                            for (b, v) in db.iter_mut().zip(r) {
                                *b += v;
                            }
                        }
                        grads.push(db);
                    }
                    per_layer[idx] = grads;
                    g = g.matmul(&d.weights);
                }
                Layer::LeakyRelu(l) => {
                    for (gv, &xv) in g.as_mut_slice().iter_mut().zip(input.as_slice()) {
                        *gv *= l.derivative(xv);
                    }
                }
                Layer::BatchNorm(b) => {
                    let (d_in, d_scale) = match (&tape.bn[idx], tape.mode) {
                        (Some(cache), Mode::Training) => bn_training_backward(b, cache, &g),
                        (None, Mode::Inference) => bn_inference_backward(b, input, &g),
                        _ => {
                            return Err(Error::InvalidState(
                                "batch norm cache inconsistent with tape mode".into(),
                            ))
                        }
                    };
                    per_layer[idx] = vec![d_scale];
                    g = d_in;
                }
            }
        }
        Ok((
            Gradients {
                tensors: per_layer.into_iter().flatten().collect(),
            },
            g,
        ))
    }

    pub fn param_infos(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            match l {
                Layer::Dense(d) => {
                    out.push(ParamInfo {
                        name: format!("layers.{i}.weight"),
                        decay: true,
                        len: d.weights.as_slice().len(),
                    });
                    if let Some(b) = &d.bias {
                        out.push(ParamInfo {
                            name: format!("layers.{i}.bias"),
                            decay: false,
                            len: b.len(),
                        });
                    }
                }
                Layer::BatchNorm(b) => out.push(ParamInfo {
                    name: format!("layers.{i}.scale"),
                    decay: false,
                    len: b.features(),
                }),
                Layer::LeakyRelu(_) => {}
            }
        }
        out
    }

    pub fn num_param_tensors(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Dense(d) => {
                    out.push(d.weights.as_slice());
                    if let Some(b) = &d.bias {
                        out.push(b.as_slice());
                    }
                }
                Layer::BatchNorm(b) => out.push(b.scale.as_slice()),
                Layer::LeakyRelu(_) => {}
            }
        }
        out
    }

    /// Mutable parameter views in declared order. Invalidates existing tapes.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.revision = next_revision();
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Dense(d) => {
                    out.push(d.weights.as_mut_slice());
                    if let Some(b) = &mut d.bias {
                        out.push(b.as_mut_slice());
                    }
                }
                Layer::BatchNorm(b) => out.push(b.scale.as_mut_slice()),
                Layer::LeakyRelu(_) => {}
            }
        }
        out
    }

    /// `λ/2 · Σ ‖W‖²_F` over dense weight matrices.
    pub fn weight_decay_penalty(&self, lambda: f64) -> f64 {
        let sq: f64 = self
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some(d.weights.frobenius_sq()),
                _ => None,
            })
            .sum();
        0.5 * lambda * sq
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            tensors: self.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn identity_dense_layer_passes_input_through() {
        let net = Network::from_layers(
            2,
            vec![Layer::Dense(DenseLayer {
                weights: Matrix::identity(2),
                bias: None,
            })],
        )
        .unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let (out, _) = net.forward(&x, Mode::Inference).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn leaky_relu_layer_forward() {
        let net = Network::from_layers(
            2,
            vec![
                Layer::Dense(DenseLayer {
                    weights: Matrix::identity(2),
                    bias: None,
                }),
                Layer::LeakyRelu(LeakyRelu::new(0.1).unwrap()),
            ],
        )
        .unwrap();
        let out = net
            .predict(&Matrix::from_rows(&[[-2.0, 3.0]]).unwrap())
            .unwrap();
        assert!((out[(0, 0)] + 0.2).abs() < 1e-15);
        assert_eq!(out[(0, 1)], 3.0);
    }

    #[test]
    fn two_layer_forward_matches_naive_oracle() {
        let arch = Architecture::mlp(4, &[5], 3, false);
        let net = Network::new(&arch, &mut rng()).unwrap();
        let mut r = rng();
        let x =
            Matrix::from_vec(6, 4, (0..24).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let out = net.predict(&x).unwrap();
        let (w1, w2) = match (&net.layers()[0], &net.layers()[2]) {
            (Layer::Dense(a), Layer::Dense(b)) => (&a.weights, &b.weights),
            _ => unreachable!(),
        };
        for i in 0..6 {
            let mut h = vec![0.0; 5];
            for (k, hk) in h.iter_mut().enumerate() {
                let mut s = 0.0;
                for j in 0..4 {
                    s += w1[(k, j)] * x[(i, j)];
                }
                *hk = if s > 0.0 { s } else { 0.1 * s };
            }
            for o in 0..3 {
                let mut s = 0.0;
                for k in 0..5 {
                    s += w2[(o, k)] * h[k];
                }
                assert!((s - out[(i, o)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = Network::new(&Architecture::mlp(3, &[4], 2, true), &mut rng()).unwrap();
        let x = Matrix::zeros(2, 4);
        assert!(matches!(
            net.forward(&x, Mode::Inference),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_grad_output_gives_zero_gradients() {
        let net = Network::new(&Architecture::mlp(3, &[4], 2, true), &mut rng()).unwrap();
        let mut r = rng();
        let x =
            Matrix::from_vec(5, 3, (0..15).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let (_, tape) = net.forward(&x, Mode::Training).unwrap();
        let (grads, dx) = net.backward(&tape, &Matrix::zeros(5, 2)).unwrap();
        assert_eq!(grads.max_abs(), 0.0);
        assert!(dx.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_dense_sum_loss_gradient_is_column_sums() {
        let net = Network::new(&Architecture::mlp(3, &[], 2, false), &mut rng()).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0], [-1.0, 0.5, 4.0]]).unwrap();
        let (_, tape) = net.forward(&x, Mode::Training).unwrap();
        let ones = Matrix::from_vec(2, 2, vec![1.0; 4]).unwrap();
        let (grads, _) = net.backward(&tape, &ones).unwrap();
        // d(sum of outputs)/dW[o][j] = Σ_i x[i][j] for every output unit o.
        let colsum = [0.0, 2.5, 7.0];
        for o in 0..2 {
            for j in 0..3 {
                assert!((grads.tensors[0][o * 3 + j] - colsum[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut net = Network::new(&Architecture::mlp(2, &[3], 2, false), &mut rng()).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0], [0.5, -1.0]]).unwrap();
        let (_, tape) = net.forward(&x, Mode::Training).unwrap();
        net.params_mut()[0][0] += 0.1;
        assert!(matches!(
            net.backward(&tape, &Matrix::zeros(2, 2)),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn bias_free_network_maps_zero_to_zero() {
        let net = Network::new(&Architecture::mlp(5, &[8, 4], 3, false), &mut rng()).unwrap();
        let out = net.predict(&Matrix::zeros(4, 5)).unwrap();
        assert!(out.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn inference_is_bitwise_repeatable() {
        let net = Network::new(&Architecture::mlp(3, &[6], 2, true), &mut rng()).unwrap();
        let x = Matrix::from_rows(&[[0.1, 0.2, 0.3], [1.0, -1.0, 0.0]]).unwrap();
        let a = net.predict(&x).unwrap();
        let b = net.predict(&x).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn inference_uses_running_stats_recurrence() {
        let mut net = Network::new(&Architecture::mlp(2, &[3], 2, true), &mut rng()).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(99);
        let mut mean = [0.0f64; 3];
        let mut var = [1.0f64; 3];
        let w1 = match &net.layers()[0] {
            Layer::Dense(d) => d.weights.clone(),
            _ => unreachable!(),
        };
        for _ in 0..5 {
            let x = Matrix::from_vec(8, 2, (0..16).map(|_| r.random_range(-2.0..2.0)).collect())
                .unwrap();
            let (_, tape) = net.forward(&x, Mode::Training).unwrap();
            net.update_running_stats(&tape).unwrap();
            // Explicit recurrence on pre-normalization activations.
            let h = x.matmul_transposed(&w1);
            let bm = h.column_means();
            for j in 0..3 {
                let bv = h.column(j).iter().map(|v| (v - bm[j]).powi(2)).sum::<f64>() / 8.0;
                mean[j] = 0.9 * mean[j] + 0.1 * bm[j];
                var[j] = 0.9 * var[j] + 0.1 * bv;
            }
        }
        match &net.layers()[1] {
            Layer::BatchNorm(b) => {
                for j in 0..3 {
                    assert!((b.running_mean[j] - mean[j]).abs() < 1e-12);
                    assert!((b.running_var[j] - var[j]).abs() < 1e-12);
                }
            }
            _ => unreachable!(),
        }
        // Inference output for a row does not depend on what else is in the batch.
        let a = Matrix::from_rows(&[[0.3, -0.7]]).unwrap();
        let b = Matrix::from_rows(&[[0.3, -0.7], [5.0, 5.0], [-3.0, 1.0]]).unwrap();
        let oa = net.predict(&a).unwrap();
        let ob = net.predict(&b).unwrap();
        assert_eq!(oa.row(0), ob.row(0));
    }

    #[test]
    fn decoder_mirrors_encoder() {
        let enc = Architecture::mlp(21, &[32, 16], 8, true);
        let dec = enc.decoder().unwrap();
        assert_eq!(dec.input_dim, 8);
        assert_eq!(dec.output_dim().unwrap(), 21);
        assert!(dec.has_bias());
        assert!(!enc.has_bias());
    }

    #[test]
    fn parse_widths() {
        let a = Architecture::parse_widths(6, "32-16-4", true).unwrap();
        assert_eq!(a.output_dim().unwrap(), 4);
        assert!(Architecture::parse_widths(6, "32-x", true).is_err());
        assert!(Architecture::parse_widths(6, "", true).is_err());
    }

    #[test]
    fn concat_and_split_round_trip() {
        let enc = Network::new(&Architecture::mlp(4, &[3], 2, true), &mut rng()).unwrap();
        let dec_arch = enc.architecture().decoder().unwrap();
        let dec = Network::new(&dec_arch, &mut rng()).unwrap();
        let joined = enc.concat(&dec).unwrap();
        let (e2, d2) = joined.split_at(enc.layers().len()).unwrap();
        assert_eq!(e2.layers(), enc.layers());
        assert_eq!(d2.layers(), dec.layers());
    }
}
