//! Small differentiable-layer toolkit: stride-2 3x3 convolutions and their
//! transposes, dense layers, activations, Adam and a finite-difference oracle.

mod adam;
mod gradcheck;
mod init;
mod layers;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_difference_gradient, max_relative_error, relative_error};
pub use init::glorot_uniform;
pub use layers::{
    conv2d_backward, conv2d_forward, conv_out_extent, deconv2d_backward, deconv2d_forward,
    dense_backward, dense_forward, Activation, LayerGrads, LayerKind, LayerSpec, KERNEL, STRIDE,
};
pub(crate) use layers::{
    conv_linear, conv_linear_backward, deconv_linear, deconv_linear_backward, dense_linear,
    dense_linear_backward, ConvGeom,
};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
