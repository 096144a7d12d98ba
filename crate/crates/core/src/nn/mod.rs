//! Minimal dense network engine: bias-free dense layers, leaky ReLU, batch
//! normalization without shift, exact backpropagation and Adam.

mod adam;
mod gradcheck;
pub mod io;
mod layers;
mod network;

pub use adam::{adam_step, adam_update, effective_gradient, AdamState};
pub use gradcheck::{
    analytic_gradients, compare_with_finite_differences, gradient_check, gradient_check_sampled,
    kink_margin, GradCheckReport,
};
pub use layers::{
    glorot_init, BatchNormScale, DenseLayer, Layer, LayerSpec, LeakyRelu, Mode, DEFAULT_BN_EPS,
    DEFAULT_BN_MOMENTUM, DEFAULT_LEAKINESS,
};
pub use network::{Architecture, Gradients, Network, ParamInfo, Tape};
