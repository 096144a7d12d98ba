//! Shared mini-batch training loop for every network-based method.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{adam_step, AdamState, Mode, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Search,
    Finetune,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Search => "search",
            Phase::Finetune => "finetune",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub phase: Phase,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub search_epochs: usize,
    pub search_lr: f64,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Rescale the gradient to at most this global L2 norm. Off by default.
    pub clip_grad_norm: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            search_epochs: 50,
            search_lr: 1e-4,
            finetune_epochs: 100,
            finetune_lr: 1e-5,
            batch_size: 200,
            weight_decay: 1e-6,
            seed: 0,
            shuffle: true,
            clip_grad_norm: None,
        }
    }
}

impl TrainingConfig {
    /// Splits `total` epochs 1:2 between the two phases, keeping learning rates.
    pub fn with_total_epochs(mut self, total: usize) -> Self {
        let search = (total as f64 / 3.0).round() as usize;
        self.search_epochs = search;
        self.finetune_epochs = total - search;
        self
    }

    pub fn total_epochs(&self) -> usize {
        self.search_epochs + self.finetune_epochs
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::invalid(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        for (name, lr) in [("search", self.search_lr), ("finetune", self.finetune_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} learning rate must be positive, got {lr}"
                )));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        if let Some(c) = self.clip_grad_norm {
            if !(c > 0.0) {
                return Err(Error::invalid("gradient clip norm must be positive"));
            }
        }
        Ok(())
    }

    fn phase_of(&self, epoch: usize) -> (Phase, f64) {
        if epoch < self.search_epochs {
            (Phase::Search, self.search_lr)
        } else {
            (Phase::Finetune, self.finetune_lr)
        }
    }
}

/// Contiguous batches over `order`. A trailing batch of a single row is merged
/// into the one before it because batch norm needs two rows.
pub(crate) fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() >= 2 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        *out.last_mut().expect("non-empty") = &order[start..];
    }
    out
}

/// Per-method batch objective. `indices` are rows of the training matrix.
pub(crate) trait BatchObjective {
    fn loss(&self, outputs: &Matrix, indices: &[usize]) -> Result<(f64, Matrix)>;

    /// Called after each optimizer step with the outputs of that step's forward.
    fn after_step(&mut self, _outputs: &Matrix, _indices: &[usize]) -> Result<()> {
        Ok(())
    }
}

fn clip(grads: &mut crate::nn::Gradients, max_norm: f64) {
    let norm = grads
        .tensors
        .iter()
        .flat_map(|t| t.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
}

/// One training-mode pass over the data that only refreshes batch-norm
/// running statistics.
pub(crate) fn prime_batch_norm(
    net: &mut Network,
    inputs: &Matrix,
    batch_size: usize,
) -> Result<()> {
    let has_bn = net
        .layers()
        .iter()
        .any(|l| matches!(l, crate::nn::Layer::BatchNorm(_)));
    if !has_bn || inputs.rows() < 2 {
        return Ok(());
    }
    let order: Vec<usize> = (0..inputs.rows()).collect();
    for idx in batches(&order, batch_size) {
        let (_, tape) = net.forward(&inputs.select_rows(idx), Mode::Training)?;
        net.update_running_stats(&tape)?;
    }
    Ok(())
}

/// Runs the two-phase Adam schedule and returns the mean loss of each epoch.
/// The recorded loss includes the weight-decay penalty.
pub(crate) fn run_schedule(
    net: &mut Network,
    inputs: &Matrix,
    cfg: &TrainingConfig,
    objective: &mut dyn BatchObjective,
) -> Result<Vec<EpochLoss>> {
    cfg.validate()?;
    if cfg.total_epochs() > 0 && inputs.rows() < 2 {
        return Err(Error::invalid("training needs at least two rows"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(net);
    let mut order: Vec<usize> = (0..inputs.rows()).collect();
    let mut log = Vec::with_capacity(cfg.total_epochs());
    for epoch in 0..cfg.total_epochs() {
        let (phase, lr) = cfg.phase_of(epoch);
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for idx in batches(&order, cfg.batch_size) {
            let batch = inputs.select_rows(idx);
            let (out, tape) = net.forward(&batch, Mode::Training)?;
            let (loss, grad_out) = objective.loss(&out, idx)?;
            let full = loss + net.weight_decay_penalty(cfg.weight_decay);
            if !full.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: "loss is not finite".into(),
                });
            }
            let (mut grads, _) = net.backward(&tape, &grad_out)?;
            if let Some(c) = cfg.clip_grad_norm {
                clip(&mut grads, c);
            }
            adam_step(net, &grads, &mut adam, lr, cfg.weight_decay).map_err(|e| match e {
                Error::Numeric(reason) => Error::Training { epoch, reason },
                other => other,
            })?;
            net.update_running_stats(&tape)?;
            objective.after_step(&out, idx)?;
            total += full;
            count += 1;
        }
        log.push(EpochLoss {
            epoch,
            phase,
            loss: total / count as f64,
        });
    }
    Ok(log)
}

/// Renders a loss log as `epoch,phase,loss` lines with a header.
pub fn format_loss_log(log: &[EpochLoss]) -> String {
    let mut s = String::from("epoch,phase,loss\n");
    for e in log {
        s.push_str(&format!("{},{},{:e}\n", e.epoch, e.phase.as_str(), e.loss));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_singleton_is_merged() {
        let order: Vec<usize> = (0..7).collect();
        let b = batches(&order, 3);
        assert_eq!(b, vec![&[0, 1, 2][..], &[3, 4, 5, 6][..]]);
        let b = batches(&order, 7);
        assert_eq!(b.len(), 1);
        let order: Vec<usize> = (0..8).collect();
        assert_eq!(batches(&order, 3).len(), 3);
    }

    #[test]
    fn total_epochs_split() {
        let c = TrainingConfig::default().with_total_epochs(150);
        assert_eq!((c.search_epochs, c.finetune_epochs), (50, 100));
        let c = TrainingConfig::default().with_total_epochs(0);
        assert_eq!(c.total_epochs(), 0);
    }

    #[test]
    fn validation() {
        let mut c = TrainingConfig::default();
        assert!(c.validate().is_ok());
        c.batch_size = 1;
        assert!(c.validate().is_err());
        let c = TrainingConfig {
            search_lr: 0.0,
            ..TrainingConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
