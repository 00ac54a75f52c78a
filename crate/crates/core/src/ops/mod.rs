//! Pure tensor kernels. Each function validates its inputs and returns a new
//! tensor; the [`crate::autograd`] tape records these same kernels.

pub mod conv;
pub mod elementwise;
pub mod norm;
pub mod reduce;
pub mod shape;

pub use conv::{conv, ConvSpec, Padding};
pub use elementwise::{activation, add, hadamard, scale, Activation};
pub use norm::{batch_norm, BatchNormOutput, BN_EPS, BN_MOMENTUM};
pub use reduce::{linear, log_softmax, masked_time_mean, mean_axes, softmax, sum};
pub use shape::{chunk, concat, narrow, permute};
