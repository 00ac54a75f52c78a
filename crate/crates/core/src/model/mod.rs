//! Model configuration, graph assembly, receptive-field analysis and
//! human-readable summaries.

mod config;
mod describe;
mod graph;
mod receptive;

use alloc::string::String;

pub use config::{Channels, ClassifierConfig, ConfigError, ModelConfig, TcnConfig, MAX_STAGES};
pub use describe::describe;
pub use graph::{
    build_model, Component, GraphMeta, ModelGraph, Module, SubModule, TcnStage, BUILD_VERSION, PARAM_BUDGET,
};
pub use receptive::{receptive_field, ReceptiveField};

use crate::blocks::BlockError;
use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("blocks: {0}")]
    Block(BlockError),
    #[error("tensor: {0}")]
    Tensor(#[from] TensorError),
    #[error("model has {params} parameters, above the budget of {cap}")]
    Budget { params: u64, cap: u64 },
    #[error("input: {0}")]
    Input(String),
}

impl From<BlockError> for ModelError {
    fn from(e: BlockError) -> Self {
        match e {
            BlockError::Tensor(t) => ModelError::Tensor(t),
            other => ModelError::Block(other),
        }
    }
}

pub type Result<T, E = ModelError> = core::result::Result<T, E>;
