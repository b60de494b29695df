//! Graph attention network and regression head.

mod batch;
mod gat;
mod model;

pub use batch::{GraphBatch, GraphInput, MessageEdge};
pub use gat::{attention_normalize, gatv2_score, static_score, AttentionVariant, LayerAttention};
pub use model::{
    Checkpoint, ForwardOutput, GatModel, LossOutput, Mode, ModelConfig, Param, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
