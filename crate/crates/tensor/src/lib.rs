//! A small dense-tensor engine with reverse-mode automatic differentiation.
//!
//! Tensors are immutable values that remember the operator that produced
//! them. Calling [`Tensor::backward`] on a scalar walks that record in
//! reverse and accumulates gradients into every tensor that tracks them.
//!
//! Only the operators a convolutional GAN needs are provided: elementwise
//! arithmetic and activations with trailing-dimension broadcasting,
//! `matmul`, `conv2d` (cross-correlation), its adjoint `conv_transpose2d`,
//! fused batch normalization, and sum/mean reductions.

mod error;
mod kernels;
mod ops;
mod real;
mod rng;
mod tensor;

pub use error::{Result, TensorError};
pub use ops::{broadcast_shape, conv_output_size, conv_transpose_output_size, BatchStats};
pub use real::{DType, Real};
pub use rng::{RngState, RngStream, RNG_ALGORITHM};
pub use tensor::{is_checked, set_checked, Tensor};
