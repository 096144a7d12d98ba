//! Batch objectives. Each returns the data term and its gradient with respect
//! to the network outputs; weight decay is added separately via
//! [`Network::weight_decay_penalty`](crate::nn::Network::weight_decay_penalty).

use crate::error::{Error, Result};
use crate::labels::SemiLabel;
use crate::matrix::{squared_distance, Matrix};

pub const DEFAULT_INVERSE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad: Matrix,
}

fn check_center(outputs: &Matrix, center: &[f64]) -> Result<()> {
    if outputs.cols() != center.len() {
        return Err(Error::shape(format!(
            "outputs have {} columns, center has {}",
            outputs.cols(),
            center.len()
        )));
    }
    if outputs.rows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    Ok(())
}

/// Writes `scale · 2(o − c)` into row `i` of `grad`.
#[inline]
fn write_distance_grad(grad: &mut Matrix, outputs: &Matrix, center: &[f64], i: usize, scale: f64) {
    for ((g, &o), &c) in grad.row_mut(i).iter_mut().zip(outputs.row(i)).zip(center) {
        *g = scale * 2.0 * (o - c);
    }
}

/// Semi-supervised hypersphere objective over one batch of `n + m` rows:
///
/// `1/(n+m) Σ_unlabeled ‖o − c‖² + η/(n+m) Σ_labeled (‖o − c‖²)^ỹ`
///
/// where the `ỹ = −1` term is `1 / (‖o − c‖² + inverse_eps)`.
pub fn deep_sad_loss(
    outputs: &Matrix,
    labels: &[SemiLabel],
    center: &[f64],
    eta: f64,
    inverse_eps: f64,
) -> Result<LossOutput> {
    check_center(outputs, center)?;
    if labels.len() != outputs.rows() {
        return Err(Error::shape(format!(
            "{} labels for {} output rows",
            labels.len(),
            outputs.rows()
        )));
    }
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if !(inverse_eps > 0.0) {
        return Err(Error::invalid("inverse_eps must be positive"));
    }
    let batch = outputs.rows() as f64;
    let mut sum = 0.0;
    let mut grad = Matrix::zeros(outputs.rows(), outputs.cols());
    for (i, label) in labels.iter().enumerate() {
        let d = squared_distance(outputs.row(i), center);
        match label {
            SemiLabel::Unlabeled => {
                sum += d;
                write_distance_grad(&mut grad, outputs, center, i, 1.0 / batch);
            }
            SemiLabel::Normal => {
                sum += eta * d;
                write_distance_grad(&mut grad, outputs, center, i, eta / batch);
            }
            SemiLabel::Anomaly => {
                let shifted = d + inverse_eps;
                sum += eta / shifted;
                write_distance_grad(
                    &mut grad,
                    outputs,
                    center,
                    i,
                    -eta / (shifted * shifted) / batch,
                );
            }
        }
    }
    Ok(LossOutput {
        loss: sum / batch,
        grad,
    })
}

/// One-class objective: mean of `‖o − c‖²`.
pub fn one_class_loss(outputs: &Matrix, center: &[f64]) -> Result<LossOutput> {
    check_center(outputs, center)?;
    let batch = outputs.rows() as f64;
    let mut sum = 0.0;
    let mut grad = Matrix::zeros(outputs.rows(), outputs.cols());
    for i in 0..outputs.rows() {
        sum += squared_distance(outputs.row(i), center);
        write_distance_grad(&mut grad, outputs, center, i, 1.0 / batch);
    }
    Ok(LossOutput {
        loss: sum / batch,
        grad,
    })
}

/// Radius state of the soft-boundary objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftBoundaryState {
    pub radius_sq: f64,
    pub nu: f64,
}

impl SoftBoundaryState {
    pub fn new(nu: f64) -> Result<Self> {
        check_nu(nu)?;
        Ok(Self { radius_sq: 0.0, nu })
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::invalid(format!("nu must lie in (0, 1], got {nu}")));
    }
    Ok(())
}

/// Soft-boundary objective `R² + 1/(ν·B) Σ max(0, ‖o − c‖² − R²)` with `R²`
/// held fixed.
pub fn soft_boundary_loss(
    outputs: &Matrix,
    center: &[f64],
    state: &SoftBoundaryState,
) -> Result<LossOutput> {
    check_center(outputs, center)?;
    check_nu(state.nu)?;
    let batch = outputs.rows() as f64;
    let scale = 1.0 / (state.nu * batch);
    let mut slack = 0.0;
    let mut grad = Matrix::zeros(outputs.rows(), outputs.cols());
    for i in 0..outputs.rows() {
        let d = squared_distance(outputs.row(i), center);
        if d > state.radius_sq {
            slack += d - state.radius_sq;
            write_distance_grad(&mut grad, outputs, center, i, scale);
        }
    }
    Ok(LossOutput {
        loss: state.radius_sq + scale * slack,
        grad,
    })
}

/// Optimal `R²` for a batch: the smallest value `r` among the squared
/// distances (or 0) such that at least `⌈(1 − ν)·n⌉` distances are `≤ r`.
/// This is the smallest minimizer of `R² + 1/(νn) Σ max(0, dᵢ − R²)`.
pub fn update_radius(distances_sq: &[f64], nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if distances_sq.is_empty() {
        return Err(Error::invalid(
            "cannot solve for a radius on an empty batch",
        ));
    }
    if distances_sq.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::Numeric(
            "squared distances must be finite and non-negative".into(),
        ));
    }
    let n = distances_sq.len();
    // Absorb representation error in (1 − ν)·n so exact integers stay exact.
    let k = (((1.0 - nu) * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if k == 0 {
        return Ok(0.0);
    }
    let mut sorted = distances_sq.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[k.min(n) - 1])
}

/// Binary cross-entropy on logits with the anomaly as the positive class.
/// `targets[i]` is 1 for anomalies and 0 for normal rows.
pub fn bce_loss(logits: &Matrix, targets: &[f64]) -> Result<LossOutput> {
    if logits.cols() != 1 || logits.rows() != targets.len() {
        return Err(Error::shape(format!(
            "bce expects a {}x1 logit column, got {:?}",
            targets.len(),
            logits.shape()
        )));
    }
    if logits.rows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let batch = logits.rows() as f64;
    let mut sum = 0.0;
    let mut grad = Matrix::zeros(logits.rows(), 1);
    for (i, &t) in targets.iter().enumerate() {
        let z = logits[(i, 0)];
        sum += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        grad[(i, 0)] = (sigmoid(z) - t) / batch;
    }
    Ok(LossOutput {
        loss: sum / batch,
        grad,
    })
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean squared reconstruction error over all entries.
pub fn mse_loss(reconstruction: &Matrix, target: &Matrix) -> Result<LossOutput> {
    if reconstruction.shape() != target.shape() {
        return Err(Error::shape(format!(
            "reconstruction {:?} vs target {:?}",
            reconstruction.shape(),
            target.shape()
        )));
    }
    let count = reconstruction.as_slice().len() as f64;
    if count == 0.0 {
        return Err(Error::invalid("empty batch"));
    }
    let mut sum = 0.0;
    let mut grad = Matrix::zeros(target.rows(), target.cols());
    for ((g, &r), &x) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(reconstruction.as_slice())
        .zip(target.as_slice())
    {
        sum += (r - x) * (r - x);
        *g = 2.0 * (r - x) / count;
    }
    Ok(LossOutput {
        loss: sum / count,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn single_unlabeled_row() {
        let out = deep_sad_loss(
            &m(&[&[2.0, 0.0]]),
            &[SemiLabel::Unlabeled],
            &[0.0, 0.0],
            1.0,
            1e-6,
        )
        .unwrap();
        assert_eq!(out.loss, 4.0);
    }

    #[test]
    fn single_labeled_anomaly_uses_inverse() {
        let out = deep_sad_loss(
            &m(&[&[0.5, 0.0]]),
            &[SemiLabel::Anomaly],
            &[0.0, 0.0],
            1.0,
            1e-300,
        )
        .unwrap();
        assert!((out.loss - 4.0).abs() < 1e-12);
    }

    #[test]
    fn all_unlabeled_equals_one_class() {
        let o = m(&[&[1.0, 2.0], &[-0.5, 0.25], &[3.0, -1.0]]);
        let c = [0.1, -0.2];
        let a = deep_sad_loss(&o, &[SemiLabel::Unlabeled; 3], &c, 1.0, 1e-6).unwrap();
        let b = one_class_loss(&o, &c).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-12);
        assert_eq!(a.grad, b.grad);
    }

    #[test]
    fn unknown_label_value_is_rejected() {
        assert!(matches!(
            SemiLabel::from_i8(2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn eta_shift_is_linear_in_labeled_term() {
        let o = m(&[&[1.0, 0.0], &[0.0, 2.0], &[0.5, 0.5]]);
        let labels = [SemiLabel::Unlabeled, SemiLabel::Normal, SemiLabel::Anomaly];
        let c = [0.0, 0.0];
        let l1 = deep_sad_loss(&o, &labels, &c, 0.5, 1e-6).unwrap().loss;
        let l2 = deep_sad_loss(&o, &labels, &c, 3.0, 1e-6).unwrap().loss;
        let labeled_term = 4.0 + 1.0 / (0.5 + 1e-6);
        assert!(((l2 - l1) - 2.5 * labeled_term / 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_class_zero_at_center() {
        let o = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(one_class_loss(&o, &[1.0, 1.0]).unwrap().loss, 0.0);
    }

    #[test]
    fn soft_boundary_direct_evaluation() {
        let o = m(&[&[1.0], &[2f64.sqrt()], &[3f64.sqrt()]]);
        let st = SoftBoundaryState {
            radius_sq: 2.0,
            nu: 1.0,
        };
        let out = soft_boundary_loss(&o, &[0.0], &st).unwrap();
        assert!((out.loss - (2.0 + 1.0 / 3.0)).abs() < 1e-12);
        assert!(SoftBoundaryState::new(0.0).is_err());
        assert!(SoftBoundaryState::new(1.5).is_err());
    }

    #[test]
    fn radius_examples() {
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(update_radius(&d, 0.1).unwrap(), 9.0);
        assert_eq!(update_radius(&d, 1.0).unwrap(), 0.0);
        assert_eq!(update_radius(&[2.5; 7], 0.3).unwrap(), 2.5);
        assert!(update_radius(&[], 0.5).is_err());
    }

    #[test]
    fn bce_is_stable_and_correct() {
        let z = m(&[&[0.0], &[800.0], &[-800.0]]);
        let out = bce_loss(&z, &[1.0, 1.0, 0.0]).unwrap();
        assert!((out.loss - 2f64.ln() / 3.0).abs() < 1e-12);
        assert!(out.loss.is_finite());
    }
}
