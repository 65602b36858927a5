//! Minimal differentiable layer set: convolution, batch normalization,
//! ReLU, 2x2 max pooling, bilinear upsampling, zero padding and softmax
//! cross-entropy. All kernels are generic over `f32`/`f64`; the `f64`
//! path exists for the finite-difference gradient checks.

mod conv;
mod loss;
mod norm;
mod ops;

pub use conv::{conv2d_bwd, conv2d_fwd, conv2d_out_extent, Conv2d};
pub use loss::{softmax_xent_bwd, softmax_xent_fwd, IGNORE_LABEL};
pub use norm::{batchnorm_bwd, batchnorm_fwd, BatchNorm, BnSaved};
pub use ops::{
    bilinear_upsample_bwd, bilinear_upsample_fwd, crop_spatial, maxpool2x2_bwd, maxpool2x2_fwd,
    relu_bwd, relu_fwd, zero_pad_to_divisible,
};
