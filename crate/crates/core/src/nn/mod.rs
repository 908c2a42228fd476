//! From-scratch convolutional classifier: layer kernels, the weighted metric loss,
//! Adam and the checkpoint format.

mod adam;
mod checkpoint;
pub mod layers;
mod loss;
mod model;
mod spec;
#[cfg(test)]
pub(crate) mod testing;

pub use adam::{adam_update, AdamConfig};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION,
};
pub use loss::{
    binary_cross_entropy, loss, soft_confusion, LossConfig, LossOutput, SoftConfusion, METRIC_EPS,
};
pub use model::{predict, Gradients, LayerParams, Mode, Model, Param};
pub use spec::{conv_chain, infer_shapes, paper_chain, LayerInfo, LayerSpec};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
