//! Forward and backward kernels for the layers used by the network.
//!
//! Feature maps are planar: `[channels][height][width]`, contiguous.
//! Every `*_backward` accumulates parameter gradients into the supplied
//! buffers and returns the gradient with respect to the layer input.

pub mod act;
pub mod conv;
pub mod norm;
pub mod resample;

pub use act::{gelu, gelu_grad, sigmoid};
pub use conv::{
    depthwise_backward, depthwise_forward, pointwise_backward, pointwise_forward, reflect_index,
};
pub use norm::{layer_norm_backward, layer_norm_forward, LayerNormCache};
pub use resample::{
    bilinear_resize, bilinear_resize_adjoint, bilinear_upsample, bilinear_upsample_adjoint,
    pixel_shuffle, pixel_unshuffle, LinearTaps,
};
