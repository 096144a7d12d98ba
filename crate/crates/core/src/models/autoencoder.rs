use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::mse_loss;
use super::schedule::{run_schedule, BatchObjective, EpochLoss, TrainingConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Architecture, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: Network,
    pub decoder: Network,
}

impl Autoencoder {
    pub fn new(encoder: Network, decoder: Network) -> Result<Self> {
        if encoder.output_dim() != decoder.input_dim()
            || decoder.output_dim() != encoder.input_dim()
        {
            return Err(Error::shape(format!(
                "encoder {}→{} does not pair with decoder {}→{}",
                encoder.input_dim(),
                encoder.output_dim(),
                decoder.input_dim(),
                decoder.output_dim()
            )));
        }
        Ok(Self { encoder, decoder })
    }

    /// Glorot-initialized encoder for `arch` and its mirrored decoder.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Network::new(arch, &mut rng)?;
        let decoder = Network::new(&arch.decoder()?, &mut rng)?;
        Self::new(encoder, decoder)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.encoder.predict(x)
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decoder.predict(&self.encoder.predict(x)?)
    }

    /// Per-row mean squared reconstruction error.
    pub fn reconstruction_errors(&self, x: &Matrix) -> Result<Vec<f64>> {
        let r = self.reconstruct(x)?;
        let d = x.cols() as f64;
        Ok(x.iter_rows()
            .zip(r.iter_rows())
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / d)
            .collect())
    }

    /// Mean squared error over all entries.
    pub fn mse(&self, x: &Matrix) -> Result<f64> {
        Ok(mse_loss(&self.reconstruct(x)?, x)?.loss)
    }
}

struct Reconstruction<'a> {
    data: &'a Matrix,
}

impl BatchObjective for Reconstruction<'_> {
    fn loss(&self, outputs: &Matrix, indices: &[usize]) -> Result<(f64, Matrix)> {
        let target = self.data.select_rows(indices);
        let out = mse_loss(outputs, &target)?;
        Ok((out.loss, out.grad))
    }
}

/// Trains encoder and decoder jointly on mean squared reconstruction error.
pub fn pretrain_autoencoder(
    data: &Matrix,
    arch: &Architecture,
    cfg: &TrainingConfig,
) -> Result<(Autoencoder, Vec<EpochLoss>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("no data to pre-train on"));
    }
    if data.cols() != arch.input_dim {
        return Err(Error::shape(format!(
            "data has {} features, architecture expects {}",
            data.cols(),
            arch.input_dim
        )));
    }
    let init = Autoencoder::init(arch, cfg.seed)?;
    let split = init.encoder.layers().len();
    let mut joint = init.encoder.concat(&init.decoder)?;
    let log = run_schedule(&mut joint, data, cfg, &mut Reconstruction { data })?;
    let (encoder, decoder) = joint.split_at(split)?;
    Ok((Autoencoder::new(encoder, decoder)?, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epochs_returns_initialization() {
        let arch = Architecture::mlp(4, &[3], 2, true);
        let x = Matrix::from_vec(5, 4, (0..20).map(|v| v as f64 / 10.0).collect()).unwrap();
        let cfg = TrainingConfig {
            seed: 9,
            ..TrainingConfig::default().with_total_epochs(0)
        };
        let (ae, log) = pretrain_autoencoder(&x, &arch, &cfg).unwrap();
        assert!(log.is_empty());
        let init = Autoencoder::init(&arch, 9).unwrap();
        assert_eq!(ae.encoder.layers(), init.encoder.layers());
        assert_eq!(ae.decoder.layers(), init.decoder.layers());
    }

    #[test]
    fn shape_mismatch() {
        let arch = Architecture::mlp(4, &[], 2, false);
        let x = Matrix::zeros(3, 5);
        assert!(matches!(
            pretrain_autoencoder(&x, &arch, &TrainingConfig::default()),
            Err(Error::Shape(_))
        ));
    }
}
