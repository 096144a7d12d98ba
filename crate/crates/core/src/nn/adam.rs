use super::network::{Gradients, Network, ParamInfo};
use crate::error::{Error, Result};

/// Adam optimizer state with coupled L2 weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub beta1: f64,
    pub beta2: f64,
    pub numeric_eps: f64,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        Self::with_shapes(net.params().iter().map(|p| p.len()))
    }

    pub fn with_shapes(lens: impl IntoIterator<Item = usize>) -> Self {
        let zeros: Vec<Vec<f64>> = lens.into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            step_count: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
            beta1: 0.9,
            beta2: 0.999,
            numeric_eps: 1e-8,
        }
    }
}

/// The gradient Adam actually sees: `grad + λ·param` for decayed tensors.
#[inline]
pub fn effective_gradient(grad: f64, param: f64, weight_decay: f64, decay: bool) -> f64 {
    if decay {
        grad + weight_decay * param
    } else {
        grad
    }
}

/// One Adam update over raw parameter slices.
pub fn adam_update(
    params: &mut [&mut [f64]],
    infos: &[ParamInfo],
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::invalid(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    if !(weight_decay >= 0.0) {
        return Err(Error::invalid(format!(
            "weight decay must be non-negative, got {weight_decay}"
        )));
    }
    let n = params.len();
    if grads.tensors.len() != n
        || infos.len() != n
        || state.first_moment.len() != n
        || state.second_moment.len() != n
    {
        return Err(Error::shape("parameter, gradient and moment counts differ"));
    }
    for (k, info) in infos.iter().enumerate() {
        if grads.tensors[k].len() != params[k].len()
            || state.first_moment[k].len() != params[k].len()
            || state.second_moment[k].len() != params[k].len()
        {
            return Err(Error::shape(format!(
                "buffer length mismatch for {}",
                info.name
            )));
        }
        if grads.tensors[k].iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient in {}",
                info.name
            )));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.numeric_eps);
    for k in 0..n {
        let decay = infos[k].decay;
        let p = &mut *params[k];
        let g = &grads.tensors[k];
        let m = &mut state.first_moment[k];
        let v = &mut state.second_moment[k];
        for i in 0..p.len() {
            let ge = effective_gradient(g[i], p[i], weight_decay, decay);
            m[i] = b1 * m[i] + (1.0 - b1) * ge;
            v[i] = b2 * v[i] + (1.0 - b2) * ge * ge;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Applies one Adam step to every parameter tensor of `net`.
pub fn adam_step(
    net: &mut Network,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    let infos = net.param_infos();
    let mut params = net.params_mut();
    adam_update(&mut params, &infos, grads, state, lr, weight_decay)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info(decay: bool, len: usize) -> Vec<ParamInfo> {
        vec![ParamInfo {
            name: "p".into(),
            decay,
            len,
        }]
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![0.5, -0.25, 2.0];
        let g = Gradients {
            tensors: vec![vec![3.0, -0.01, 1e-3]],
        };
        let mut st = AdamState::with_shapes([3]);
        let before = p.clone();
        adam_update(
            &mut [p.as_mut_slice()],
            &info(true, 3),
            &g,
            &mut st,
            1e-3,
            0.0,
        )
        .unwrap();
        // At t=1, m̂ = g and v̂ = g², so the step is lr·g/(|g| + eps).
        for i in 0..3 {
            let gi = g.tensors[0][i];
            let expected = 1e-3 * gi / (gi.abs() + 1e-8);
            assert!(((before[i] - p[i]) - expected).abs() < 1e-15);
            assert!(((before[i] - p[i]).abs() - 1e-3).abs() < 1e-7);
        }
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let mut p = vec![1.0, -2.0];
        let g = Gradients {
            tensors: vec![vec![0.0, 0.0]],
        };
        let mut st = AdamState::with_shapes([2]);
        adam_update(
            &mut [p.as_mut_slice()],
            &info(true, 2),
            &g,
            &mut st,
            0.1,
            0.0,
        )
        .unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn coupled_decay_enters_the_gradient() {
        assert_eq!(effective_gradient(0.0, 1.0, 1e-6, true), 1e-6);
        assert_eq!(effective_gradient(0.0, 1.0, 1e-6, false), 0.0);
        let mut p = vec![1.0];
        let g = Gradients {
            tensors: vec![vec![0.0]],
        };
        let mut st = AdamState::with_shapes([1]);
        adam_update(
            &mut [p.as_mut_slice()],
            &info(true, 1),
            &g,
            &mut st,
            1e-4,
            1e-6,
        )
        .unwrap();
        assert!((st.first_moment[0][0] - 0.1 * 1e-6).abs() < 1e-20);
        assert!(p[0] < 1.0);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = vec![1.0];
        let g = Gradients {
            tensors: vec![vec![f64::NAN]],
        };
        let mut st = AdamState::with_shapes([1]);
        let err = adam_update(
            &mut [p.as_mut_slice()],
            &info(true, 1),
            &g,
            &mut st,
            0.1,
            0.0,
        )
        .unwrap_err();
        assert!(matches!(&err, Error::Numeric(m) if m.contains('p')));
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn rejects_bad_learning_rate() {
        let mut p = vec![1.0];
        let g = Gradients {
            tensors: vec![vec![0.0]],
        };
        let mut st = AdamState::with_shapes([1]);
        assert!(adam_update(
            &mut [p.as_mut_slice()],
            &info(true, 1),
            &g,
            &mut st,
            0.0,
            0.0
        )
        .is_err());
    }
}
