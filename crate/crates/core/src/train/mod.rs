//! Optimization: losses, Adam, the trainable model and the fitting loop.

mod adam;
mod check;
mod fit;
mod loss;
mod model;

pub use adam::{clip_global_norm, AdamState, BETA1, BETA2, EPS};
pub use check::{gradient_check, relative_error, ClassCheck};
pub use fit::*;
pub use loss::{masked_l1_color, pcc_depth_loss, photometric_mse, tv_backward, tv_loss};
pub use model::{
    loss_and_grads, render_target, LossParts, LossWeights, MarchOptions, MaskMode, Model, ModelSpec, ModelView,
    ParamClass, RayTarget,
};
