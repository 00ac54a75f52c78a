//! Network building blocks: the 3-D stem, the reference per-frame extractor,
//! the temporal block zoo and the classification head.
//!
//! Blocks hold parameter handles into a [`ParamStore`](crate::params::ParamStore)
//! and are independent of the scalar type; forward passes run through a
//! [`Session`](crate::params::Session).

mod classifier;
mod extractor;
mod kind;
mod layers;
mod stem;
mod temporal;

use alloc::string::String;

pub use classifier::Classifier;
pub use extractor::{Extractor, ExtractorSpec, IrBlock2d};
pub use kind::{BlockKind, BlockSpec, Expansion};
pub use layers::{ConvLayer, LayerFactory, LayerRef, LinearLayer, NormLayer, Unit};
pub use stem::{Stem, StemSpec};
pub use temporal::{StarBody, TemporalBlock, TemporalBody};

use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BlockError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("unknown block kind `{0}`")]
    UnknownKind(String),
    #[error("block kind `{0}` is experimental; set tcn.experimental = true to enable it")]
    Experimental(&'static str),
    #[error("expansion {expansion} times {channels} channels is not an integer")]
    FractionalWidth { expansion: Expansion, channels: usize },
    #[error("invalid expansion `{0}`")]
    InvalidExpansion(String),
    #[error("depth-wise kernel must be odd and positive, got {0}")]
    EvenKernel(usize),
    #[error("stem input {0}")]
    StemInput(String),
    #[error("spatial size {size} is too small for extractor stage {stage}")]
    SpatialExhausted { stage: usize, size: usize },
}

pub type Result<T, E = BlockError> = core::result::Result<T, E>;
