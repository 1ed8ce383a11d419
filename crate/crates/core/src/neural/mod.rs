//! Small reverse-mode network stack for single-image fitting.

mod adam;
mod conv;
#[cfg(test)]
pub(crate) mod gradcheck;
mod layers;
mod net;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvLayer, Padding, KERNEL, PAD};
pub use layers::{
    center_crop, center_crop_backward, instance_norm, instance_norm_backward, swish, swish_grad,
    upsample2, upsample2_backward, Activation,
};
pub use net::{Gradients, NetworkConfig, SkipNet};
pub use tensor::Tensor3;
