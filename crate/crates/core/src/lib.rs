//! Causal dilated temporal convolution networks for isolated-word visual speech
//! recognition, built on a small deterministic tensor engine.
//!
//! The crate is `no_std` (it needs `alloc`) and covers:
//!
//! - [`tensor`], [`ops`] and [`autograd`]: shaped arrays, the convolution,
//!   normalization, elementwise and reduction kernels used by the blocks, and a
//!   reverse-mode tape with a finite-difference gradient checker.
//! - [`blocks`]: the 3-D frontend stem, a reference per-frame feature extractor,
//!   the temporal block zoo and the classification head.
//! - [`model`]: declarative model configuration, graph assembly, receptive
//!   field analysis and summaries.
//! - [`complexity`]: exact parameter and multiply-accumulate accounting with
//!   fixture verification.
//! - [`train`]: cosine-annealed SGD, MixUp, crop/flip and variable-length
//!   augmentation, a synthetic sequence dataset and the epoch loop.
//!
//! File formats, configuration parsing and the command-line front end live in
//! the companion `tempconv` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autograd;
pub mod blocks;
pub mod complexity;
pub mod diagnostics;
pub mod model;
pub mod ops;
pub mod params;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use autograd::{GradTape, Var};
pub use scalar::{DType, Scalar};
pub use tensor::{Tensor, TensorError};
